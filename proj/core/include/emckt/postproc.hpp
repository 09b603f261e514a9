#pragma once

#include <array>
#include <complex>
#include <limits>
#include <vector>

namespace emckt {

/// Discrete-time Fourier transform by direct summation at arbitrary
/// frequencies: X(f) = dt * sum_n x_n e^{-j 2 pi f n dt}. No windowing.
std::vector<std::complex<double>> dft_postprocess(const std::vector<double>& samples, double dt,
                                                  const std::vector<double>& freqs);

/// Uniformly spaced frequency grid [f_lo, f_hi] with n points.
std::vector<double> frequency_grid(double f_lo, double f_hi, int n);

struct PortParameterPoint {
    double f = 0.0;
    std::complex<double> y;    ///< admittance I/V (S)
    std::complex<double> s11;
    bool flagged = false;      ///< |V| below the noise floor, values not usable
};

/// One-port Y and S11 from voltage/current spectra with reference impedance
/// z0. Points where |V(f)| falls below floor_rel * max|V| are flagged rather
/// than extrapolated.
std::vector<PortParameterPoint> port_admittance_and_s(
    const std::vector<double>& freqs, const std::vector<std::complex<double>>& v,
    const std::vector<std::complex<double>>& i, double z0 = 50.0, double floor_rel = 1e-9);

/// Two-port S from a 2x2 admittance matrix at one frequency.
std::array<std::complex<double>, 4> s_from_y2(const std::array<std::complex<double>, 4>& y,
                                              double z0 = 50.0);

/// eta = p_dc / p_source * 100 (percent).
double conversion_efficiency(double p_dc, double p_source);

/// ||a - b||_2 / ||b||_2 over plain sample vectors.
double relative_l2(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace emckt
