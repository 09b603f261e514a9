#include "emckt/portx.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "emckt/errors.hpp"

namespace emckt {

static_assert(std::endian::native == std::endian::little,
              "archive format is little-endian; big-endian hosts are unsupported");

ImpulseArchive::ImpulseArchive(int n_ports, int n_lags, double dt, int t_delta,
                               std::vector<std::string> labels)
    : n_ports_(n_ports), n_lags_(n_lags), dt_(dt), t_delta_(t_delta), labels_(std::move(labels)) {
    if (n_ports < 1 || n_lags < 1) throw InvalidArgument("archive: need at least one port and lag");
    if (!(dt > 0.0)) throw InvalidArgument("archive: dt must be positive");
    if (static_cast<int>(labels_.size()) != n_ports)
        throw InvalidArgument("archive: label count mismatch");
    g_.assign(static_cast<std::size_t>(n_ports) * n_ports * n_lags, 0.0);
}

double ImpulseArchive::at(int k, int q, int lag) const {
    return g_[(static_cast<std::size_t>(k) * n_ports_ + q) * n_lags_ + lag];
}

double& ImpulseArchive::at(int k, int q, int lag) {
    return g_[(static_cast<std::size_t>(k) * n_ports_ + q) * n_lags_ + lag];
}

namespace {

constexpr char kMagic[4] = {'E', 'M', 'P', 'X'};
constexpr std::uint32_t kVersion = 1;

class Fnv1a {
public:
    void feed(const void* data, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= b[i];
            hash_ *= 0x100000001b3ull;
        }
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

template <typename T>
void put(std::ofstream& out, Fnv1a& sum, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
    sum.feed(&v, sizeof v);
}

template <typename T>
T take(std::ifstream& in, Fnv1a& sum) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ArchiveError("archive: truncated file");
    sum.feed(&v, sizeof v);
    return v;
}

}  // namespace

void ImpulseArchive::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("archive: cannot open " + path + " for writing");
    Fnv1a sum;
    out.write(kMagic, 4);
    sum.feed(kMagic, 4);
    put(out, sum, kVersion);
    put(out, sum, static_cast<std::uint32_t>(n_ports_));
    put(out, sum, static_cast<std::uint32_t>(n_lags_));
    put(out, sum, dt_);
    put(out, sum, static_cast<std::uint32_t>(t_delta_));
    put(out, sum, static_cast<std::uint32_t>(labels_.size()));
    for (const std::string& label : labels_) {
        put(out, sum, static_cast<std::uint32_t>(label.size()));
        out.write(label.data(), static_cast<std::streamsize>(label.size()));
        sum.feed(label.data(), label.size());
    }
    out.write(reinterpret_cast<const char*>(g_.data()),
              static_cast<std::streamsize>(g_.size() * sizeof(double)));
    sum.feed(g_.data(), g_.size() * sizeof(double));
    const std::uint64_t checksum = sum.value();
    out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
    if (!out) throw ConfigError("archive: write failed for " + path);
}

ImpulseArchive ImpulseArchive::read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("archive: cannot open " + path);
    Fnv1a sum;
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ArchiveError("archive: bad magic");
    sum.feed(magic, 4);
    const auto version = take<std::uint32_t>(in, sum);
    if (version != kVersion) throw ArchiveError("archive: unsupported version");
    const auto np = take<std::uint32_t>(in, sum);
    const auto nl = take<std::uint32_t>(in, sum);
    const auto dt = take<double>(in, sum);
    const auto t_delta = take<std::uint32_t>(in, sum);
    const auto n_labels = take<std::uint32_t>(in, sum);
    if (n_labels != np) throw ArchiveError("archive: label count mismatch");
    std::vector<std::string> labels;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        const auto len = take<std::uint32_t>(in, sum);
        if (len > 4096) throw ArchiveError("archive: implausible label length");
        std::string s(len, '\0');
        in.read(s.data(), len);
        if (!in) throw ArchiveError("archive: truncated file");
        sum.feed(s.data(), len);
        labels.push_back(std::move(s));
    }
    ImpulseArchive a(static_cast<int>(np), static_cast<int>(nl), dt, static_cast<int>(t_delta),
                     std::move(labels));
    in.read(reinterpret_cast<char*>(a.g_.data()),
            static_cast<std::streamsize>(a.g_.size() * sizeof(double)));
    if (!in) throw ArchiveError("archive: truncated payload");
    sum.feed(a.g_.data(), a.g_.size() * sizeof(double));
    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (!in) throw ArchiveError("archive: missing checksum");
    if (stored != sum.value()) throw ArchiveError("archive: checksum mismatch");
    for (double v : a.g_)
        if (!std::isfinite(v)) throw ArchiveError("archive: non-finite entry");
    return a;
}

ImpulseArchive extract(const MixedSystem& sys, const TimeBasis& basis, const CouplingMap& map,
                       int n_lags, const ExtractOptions& opts, const PmlOperators* pml,
                       std::vector<long>* gmres_per_port) {
    const int np = map.n_ports();
    if (np < 1) throw InvalidArgument("extract: no ports");
    if (opts.t_delta < 1) throw InvalidArgument("extract: t_delta must be >= 1");
    ImpulseArchive archive(np, n_lags, basis.dt, opts.t_delta, map.labels());
    if (gmres_per_port) gmres_per_port->assign(static_cast<std::size_t>(np), 0);

    auto run_port = [&](int q) {
        Stepper stepper(sys, basis, opts.gmres, pml);
        FieldState state = make_state(sys);
        std::vector<double> unit(static_cast<std::size_t>(np), 0.0);
        unit[static_cast<std::size_t>(q)] = 1.0;
        const std::vector<double> cq = impress_current(map, unit, sys.n_edges());
        std::vector<double> half(cq.size());
        for (std::size_t i = 0; i < cq.size(); ++i) half[i] = 0.5 * cq[i];
        const std::vector<double> zero(cq.size(), 0.0);

        const int last_step = opts.t_delta + n_lags - 1;
        for (int i = 1; i <= last_step; ++i) {
            // hat at t_delta: tested load is c/2 on the steps ending at
            // t_delta and t_delta+1, zero elsewhere
            const std::vector<double>& load =
                (i == opts.t_delta || i == opts.t_delta + 1) ? half : zero;
            stepper.step(state, load);
            if (i >= opts.t_delta) {
                const std::vector<double> v = read_port_voltage(map, state);
                for (int k = 0; k < np; ++k)
                    archive.at(k, q, i - opts.t_delta) = v[static_cast<std::size_t>(k)];
            }
        }
        if (gmres_per_port)
            (*gmres_per_port)[static_cast<std::size_t>(q)] = stepper.total_gmres_iterations();
    };

    const int workers = std::max(1, std::min(opts.workers, np));
    if (workers == 1) {
        for (int q = 0; q < np; ++q) run_port(q);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int q = next.fetch_add(1); q < np; q = next.fetch_add(1)) run_port(q);
            });
        for (auto& th : pool) th.join();
    }
    return archive;
}

std::vector<double> reconstruct_port_voltage(const ImpulseArchive& archive,
                                             const std::vector<std::vector<double>>& currents,
                                             int step) {
    const int np = archive.n_ports();
    if (static_cast<int>(currents.size()) != np)
        throw InvalidArgument("reconstruct: current history port count mismatch");
    if (step >= archive.n_lags())
        throw HorizonError("reconstruct: step " + std::to_string(step) +
                           " exceeds the archive horizon N_t=" + std::to_string(archive.n_lags()));
    std::vector<double> v(static_cast<std::size_t>(np), 0.0);
    for (int k = 0; k < np; ++k) {
        double acc = 0.0;
        for (int q = 0; q < np; ++q) {
            const auto& iq = currents[static_cast<std::size_t>(q)];
            const int last = std::min<int>(step, static_cast<int>(iq.size()) - 1);
            for (int j = 0; j <= last; ++j) acc += archive.at(k, q, step - j) * iq[static_cast<std::size_t>(j)];
        }
        v[static_cast<std::size_t>(k)] = acc;
    }
    return v;
}

TransientRecord replay_transient_solve(const ImpulseArchive& archive, MnaSystem& mna, int n_steps,
                                       const ReplayOptions&) {
    const int np = archive.n_ports();
    if (std::abs(mna.dt() - archive.dt()) > 0.0)
        throw ConfigError("replay: circuit dt differs from the archive dt");
    if (n_steps > archive.n_lags())
        throw HorizonError("replay: n_steps " + std::to_string(n_steps) + " exceeds archive N_t=" +
                           std::to_string(archive.n_lags()));
    const int nmp = mna.n_ports();
    if (nmp == 0) throw ConfigError("replay: netlist has no EM ports");
    std::vector<int> gid(static_cast<std::size_t>(nmp));
    for (int k = 0; k < nmp; ++k) {
        gid[static_cast<std::size_t>(k)] = mna.port_global_id(k);
        if (gid[static_cast<std::size_t>(k)] < 0 || gid[static_cast<std::size_t>(k)] >= np)
            throw ConfigError("replay: netlist references a port outside the archive");
    }

    // lag-0 block of the attached ports, folded into the circuit Jacobian
    std::vector<double> g0(static_cast<std::size_t>(nmp) * nmp);
    for (int k = 0; k < nmp; ++k)
        for (int q = 0; q < nmp; ++q)
            g0[static_cast<std::size_t>(k) * nmp + q] =
                archive.at(gid[static_cast<std::size_t>(k)], gid[static_cast<std::size_t>(q)], 0);

    TransientRecord rec;
    rec.dt = archive.dt();
    rec.port_labels = archive.labels();
    rec.voltage.assign(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(n_steps), 0.0));
    rec.current.assign(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(n_steps), 0.0));
    rec.newton_iterations.assign(static_cast<std::size_t>(n_steps), 0);
    rec.gmres_iterations.assign(static_cast<std::size_t>(n_steps), 0);
    rec.step_seconds.assign(static_cast<std::size_t>(n_steps), 0.0);

    std::vector<std::vector<double>> i_hist(static_cast<std::size_t>(nmp));
    for (auto& h : i_hist) h.assign(1, 0.0);  // step 0 current is zero

    for (int i = 1; i < n_steps; ++i) {
        const auto wall_start = std::chrono::steady_clock::now();
        // history term: responses of all currents strictly before this step
        std::vector<double> hist(static_cast<std::size_t>(nmp), 0.0);
        for (int k = 0; k < nmp; ++k) {
            double acc = 0.0;
            for (int q = 0; q < nmp; ++q) {
                const auto& iq = i_hist[static_cast<std::size_t>(q)];
                for (int j = 1; j < i && j < static_cast<int>(iq.size()); ++j)
                    acc += archive.at(gid[static_cast<std::size_t>(k)], gid[static_cast<std::size_t>(q)], i - j) *
                           iq[static_cast<std::size_t>(j)];
            }
            hist[static_cast<std::size_t>(k)] = acc;
        }
        mna.set_port_term(g0, hist);
        const int iters = mna.solve_step(i * archive.dt());
        for (int k = 0; k < nmp; ++k)
            i_hist[static_cast<std::size_t>(k)].push_back(
                mna.solution()[static_cast<std::size_t>(mna.port_branch_unknown(k))]);

        // readback at every archive port, attached or probe
        for (int k = 0; k < np; ++k) {
            double v_read = 0.0;
            for (int q = 0; q < nmp; ++q) {
                const auto& iq = i_hist[static_cast<std::size_t>(q)];
                for (int j = 1; j <= i; ++j)
                    v_read += archive.at(k, gid[static_cast<std::size_t>(q)], i - j) * iq[static_cast<std::size_t>(j)];
            }
            rec.voltage[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = v_read;
        }
        for (int q = 0; q < nmp; ++q)
            rec.current[static_cast<std::size_t>(gid[static_cast<std::size_t>(q)])][static_cast<std::size_t>(i)] =
                i_hist[static_cast<std::size_t>(q)].back();
        rec.newton_iterations[static_cast<std::size_t>(i)] = iters;
        rec.step_seconds[static_cast<std::size_t>(i)] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    }
    return rec;
}

}  // namespace emckt
