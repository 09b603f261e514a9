#include "emckt/postproc.hpp"

#include <cmath>

#include "emckt/errors.hpp"

namespace emckt {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<std::complex<double>> dft_postprocess(const std::vector<double>& samples, double dt,
                                                  const std::vector<double>& freqs) {
    if (samples.empty()) throw InvalidArgument("dft: empty series");
    if (!(dt > 0.0)) throw InvalidArgument("dft: dt must be positive");
    std::vector<std::complex<double>> out;
    out.reserve(freqs.size());
    for (double f : freqs) {
        const double w = 2.0 * kPi * f * dt;
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t n = 0; n < samples.size(); ++n) {
            const double ph = w * static_cast<double>(n);
            acc += samples[n] * std::complex<double>(std::cos(ph), -std::sin(ph));
        }
        out.push_back(acc * dt);
    }
    return out;
}

std::vector<double> frequency_grid(double f_lo, double f_hi, int n) {
    if (n < 1 || f_hi < f_lo) throw InvalidArgument("frequency_grid: bad range");
    std::vector<double> f(static_cast<std::size_t>(n));
    if (n == 1) {
        f[0] = f_lo;
        return f;
    }
    for (int i = 0; i < n; ++i)
        f[static_cast<std::size_t>(i)] = f_lo + (f_hi - f_lo) * i / (n - 1);
    return f;
}

std::vector<PortParameterPoint> port_admittance_and_s(
    const std::vector<double>& freqs, const std::vector<std::complex<double>>& v,
    const std::vector<std::complex<double>>& i, double z0, double floor_rel) {
    if (freqs.size() != v.size() || v.size() != i.size())
        throw InvalidArgument("port parameters: spectra must share one grid");
    double vmax = 0.0;
    for (const auto& s : v) vmax = std::max(vmax, std::abs(s));
    std::vector<PortParameterPoint> out(freqs.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        out[k].f = freqs[k];
        if (std::abs(v[k]) <= floor_rel * vmax || vmax == 0.0) {
            out[k].flagged = true;
            continue;
        }
        out[k].y = i[k] / v[k];
        out[k].s11 = (1.0 - z0 * out[k].y) / (1.0 + z0 * out[k].y);
    }
    return out;
}

std::array<std::complex<double>, 4> s_from_y2(const std::array<std::complex<double>, 4>& y,
                                              double z0) {
    // S = (I - z0 Y)(I + z0 Y)^{-1}
    const std::complex<double> a = 1.0 + z0 * y[0], b = z0 * y[1];
    const std::complex<double> c = z0 * y[2], d = 1.0 + z0 * y[3];
    const std::complex<double> det = a * d - b * c;
    if (std::abs(det) == 0.0) throw InvalidArgument("s_from_y2: singular I + z0 Y");
    const std::complex<double> ia = d / det, ib = -b / det, ic = -c / det, id = a / det;
    const std::complex<double> m00 = 1.0 - z0 * y[0], m01 = -z0 * y[1];
    const std::complex<double> m10 = -z0 * y[2], m11 = 1.0 - z0 * y[3];
    return {m00 * ia + m01 * ic, m00 * ib + m01 * id, m10 * ia + m11 * ic, m10 * ib + m11 * id};
}

double conversion_efficiency(double p_dc, double p_source) {
    if (p_dc < 0.0 || p_source < 0.0) throw InvalidArgument("efficiency: powers must be >= 0");
    if (p_source == 0.0) throw InvalidArgument("efficiency: source power must be positive");
    return p_dc / p_source * 100.0;
}

double relative_l2(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidArgument("relative_l2: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
        den += b[k] * b[k];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

}  // namespace emckt
