#include "emckt/run.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "emckt/errors.hpp"
#include "emckt/postproc.hpp"

namespace emckt {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("run: cannot open output file " + path);
    return out;
}

}  // namespace

Scene build_scene(const RunConfig& rc) {
    Scene scene;
    if (rc.mesh_kind == "box") {
        scene.mesh = std::make_unique<TetMesh>(TetMesh::build_box(rc.nx, rc.ny, rc.nz, rc.dims));
    } else {
        scene.mesh = std::make_unique<TetMesh>(TetMesh::read_ascii_file(rc.mesh_file));
    }
    const TetMesh& mesh = *scene.mesh;

    std::vector<std::uint8_t> pec(static_cast<std::size_t>(mesh.n_edges()), 0);
    if (rc.pec_boundary)
        for (int e = 0; e < mesh.n_edges(); ++e)
            if (mesh.edge_on_boundary(e)) pec[static_cast<std::size_t>(e)] = 1;

    std::vector<Material> materials;
    const int max_mat = [&] {
        int m = 0;
        for (int t = 0; t < mesh.n_tets(); ++t) m = std::max(m, mesh.tet_material(t));
        return m;
    }();
    for (int m = 0; m <= max_mat; ++m) materials.push_back({rc.eps_r, rc.mu_r});
    scene.sys = assemble_mixed_system(mesh, materials, std::move(pec));

    for (std::size_t i = 0; i < rc.ports.size(); ++i)
        scene.port_specs.push_back(resolve_port(mesh, rc.ports[i].a, rc.ports[i].b,
                                                static_cast<int>(i), rc.ports[i].label));
    scene.coupling = build_coupling(mesh, scene.sys, scene.port_specs);

    if (rc.pml.enabled) {
        Vec3 lo{0.0, 0.0, 0.0}, hi = rc.dims;
        if (rc.mesh_kind != "box")
            throw ConfigError("run: pml requires the builtin box mesh (slab geometry)");
        const double cell = std::min({rc.dims.x / rc.nx, rc.dims.y / rc.ny, rc.dims.z / rc.nz});
        const StretchProfile profile =
            build_stretch_profile(lo, hi, rc.pml.thickness_cells * cell, rc.pml.order, rc.pml.r0,
                                  rc.pml.faces);
        scene.pml = build_pml_operators(mesh, profile, scene.sys.eps_tet, scene.sys.inv_mu_tet);
        scene.has_pml = !scene.pml.empty();
    }

    scene.basis.dt = rc.resolved_dt();
    return scene;
}

std::unique_ptr<MnaSystem> CircuitBundle::make_mna(double dt, const NewtonConfig& cfg,
                                                   const std::vector<std::string>& port_labels) const {
    auto mna = std::make_unique<MnaSystem>(netlist, dt, cfg, &port_labels);
    for (std::size_t i = 0; i < adapters.size(); ++i)
        mna->attach_device(device_elements[i], adapters[i].get());
    return mna;
}

void CircuitBundle::reset_devices() {
    for (auto& a : adapters) a->reset();
}

CircuitBundle load_circuit(const std::string& netlist_path, double gummel_tol) {
    std::ifstream in(netlist_path);
    if (!in) throw ConfigError("run: cannot open netlist " + netlist_path);
    std::ostringstream text;
    text << in.rdbuf();
    CircuitBundle bundle;
    bundle.netlist = parse_netlist(text.str());

    const std::filesystem::path base = std::filesystem::path(netlist_path).parent_path();
    for (const Element& el : bundle.netlist.elements) {
        if (el.kind != Element::Kind::DDDevice) continue;
        std::filesystem::path p(el.device_file);
        if (p.is_relative()) p = base / p;
        const DDDeviceSpec spec = load_device_spec(p.string());
        bundle.devices.push_back(std::make_unique<DDDevice>(spec));
        GummelConfig gc;
        gc.tol = gummel_tol;
        bundle.adapters.push_back(std::make_unique<DDPortAdapter>(*bundle.devices.back(), gc));
        bundle.device_elements.push_back(el.name);
    }
    return bundle;
}

void write_waveform_csv(const std::string& path, const TransientRecord& rec) {
    std::ofstream out = open_out(path);
    out << "step,time_s,port_id,V,I,newton_iters,gmres_iters\n";
    const int np = static_cast<int>(rec.voltage.size());
    for (int i = 0; i < rec.n_steps(); ++i) {
        for (int q = 0; q < np; ++q) {
            out << i << ',' << fmt(i * rec.dt) << ',' << q << ','
                << fmt(rec.voltage[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)]) << ','
                << fmt(rec.current[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)]) << ','
                << rec.newton_iterations[static_cast<std::size_t>(i)] << ','
                << rec.gmres_iterations[static_cast<std::size_t>(i)] << '\n';
        }
    }
}

void write_cost_report_csv(const std::string& path, const CostReport& r) {
    std::ofstream out = open_out(path);
    out << "n_em,n_ckt,n_p,n_t,avg_newton_coupled,avg_gmres_coupled,avg_gmres_extract,"
           "per_step_coupled_s,per_step_extract_s,per_step_replay_s\n";
    out << r.n_em << ',' << r.n_ckt << ',' << r.n_p << ',' << r.n_t << ','
        << fmt(r.avg_newton_coupled) << ',' << fmt(r.avg_gmres_coupled) << ','
        << fmt(r.avg_gmres_extract) << ',' << fmt(r.per_step_coupled_s) << ','
        << fmt(r.per_step_extract_s) << ',' << fmt(r.per_step_replay_s) << '\n';
}

double waveform_csv_relative_l2(const std::string& path_a, const std::string& path_b) {
    auto read = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("compare: cannot reopen " + path);
        std::string line;
        std::getline(in, line);  // header
        std::vector<double> v;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string cell;
            int col = 0;
            double volt = 0.0;
            while (std::getline(ls, cell, ',')) {
                if (col == 3) volt = std::stod(cell);
                ++col;
            }
            v.push_back(volt);
        }
        return v;
    };
    return relative_l2(read(path_a), read(path_b));
}

namespace {

void write_spectra(const RunConfig& rc, const KeyValueFile* kv, const TransientRecord& rec,
                   const std::string& prefix) {
    (void)kv;
    if (!(rc.f_max > 0.0)) return;
    // default band: 20 points across (0, f_max]
    const auto freqs = frequency_grid(rc.f_max / 20.0, rc.f_max, 20);
    for (std::size_t q = 0; q < rec.voltage.size(); ++q) {
        const auto vf = dft_postprocess(rec.voltage[q], rec.dt, freqs);
        const auto fi = dft_postprocess(rec.current[q], rec.dt, freqs);
        std::ofstream outv = open_out(prefix + "_spectrum_v_port" + std::to_string(q) + ".csv");
        outv << "f_Hz,re,im\n";
        for (std::size_t k = 0; k < freqs.size(); ++k)
            outv << fmt(freqs[k]) << ',' << fmt(vf[k].real()) << ',' << fmt(vf[k].imag()) << '\n';
        std::ofstream outi = open_out(prefix + "_spectrum_i_port" + std::to_string(q) + ".csv");
        outi << "f_Hz,re,im\n";
        for (std::size_t k = 0; k < freqs.size(); ++k)
            outi << fmt(freqs[k]) << ',' << fmt(fi[k].real()) << ',' << fmt(fi[k].imag()) << '\n';
    }
}

ImpulseArchive obtain_archive(const RunConfig& rc, const Scene& scene, std::ostream& log,
                              std::vector<long>* gmres_per_port = nullptr) {
    if (!rc.archive_path.empty() && std::filesystem::exists(rc.archive_path)) {
        log << "loading archive " << rc.archive_path << "\n";
        ImpulseArchive a = ImpulseArchive::read_file(rc.archive_path);
        if (std::abs(a.dt() - scene.basis.dt) > 0.0)
            throw ConfigError("archive dt does not match the configured dt");
        return a;
    }
    log << "extracting impulse responses (" << scene.coupling.n_ports() << " ports, " << rc.n_steps
        << " lags)\n";
    ExtractOptions opts;
    opts.t_delta = rc.t_delta;
    opts.workers = rc.extract_workers;
    opts.gmres = rc.gmres;
    ImpulseArchive a = extract(scene.sys, scene.basis, scene.coupling, rc.n_steps, opts,
                               scene.has_pml ? &scene.pml : nullptr, gmres_per_port);
    if (!rc.archive_path.empty()) a.write_file(rc.archive_path);
    return a;
}

TransientRecord run_coupled_record(const RunConfig& rc, const Scene& scene,
                                   const CircuitBundle& circuit) {
    auto mna = circuit.make_mna(scene.basis.dt, rc.newton, scene.coupling.labels());
    Stepper stepper(scene.sys, scene.basis, rc.gmres, scene.has_pml ? &scene.pml : nullptr);
    CoupledOptions opts;
    opts.gmres = rc.gmres;
    opts.newton = rc.newton;
    return coupled_transient_solve(stepper, *mna, scene.coupling, rc.n_steps, opts);
}

TransientRecord run_replay_record(const RunConfig& rc, const Scene& scene,
                                  const ImpulseArchive& archive, const CircuitBundle& circuit) {
    auto mna = circuit.make_mna(archive.dt(), rc.newton, scene.coupling.labels());
    ReplayOptions opts;
    opts.newton = rc.newton;
    return replay_transient_solve(archive, *mna, rc.n_steps, opts);
}

int run_compare(const RunConfig& rc, std::ostream& log) {
    Scene scene = build_scene(rc);
    if (rc.netlist_path.empty()) throw ConfigError("compare: netlist is required");
    CircuitBundle circuit = load_circuit(rc.netlist_path, rc.gummel_tol);

    const ImpulseArchive archive = obtain_archive(rc, scene, log);
    circuit.reset_devices();
    log << "running coupled reference\n";
    const TransientRecord coupled = run_coupled_record(rc, scene, circuit);
    circuit.reset_devices();
    log << "running replay\n";
    const TransientRecord replay = run_replay_record(rc, scene, archive, circuit);

    const std::string coupled_csv = rc.out_dir + "/coupled_waveforms.csv";
    const std::string replay_csv = rc.out_dir + "/replay_waveforms.csv";
    write_waveform_csv(coupled_csv, coupled);
    write_waveform_csv(replay_csv, replay);
    write_spectra(rc, nullptr, coupled, rc.out_dir + "/coupled");
    write_spectra(rc, nullptr, replay, rc.out_dir + "/replay");

    const double l2 = relative_l2(replay, coupled);
    log << "relative L2 (replay vs coupled) = " << fmt(l2) << "\n";
    {
        std::ofstream out = open_out(rc.out_dir + "/compare.csv");
        out << "relative_l2,threshold\n" << fmt(l2) << ',' << fmt(rc.compare_tol) << '\n';
    }
    return l2 <= rc.compare_tol ? kExitOk : kExitCompareFailure;
}

int run_bench(const RunConfig& rc, std::ostream& log) {
    RunConfig brc = rc;
    if (rc.bench_steps > 0) brc.n_steps = rc.bench_steps;
    Scene scene = build_scene(brc);
    if (brc.netlist_path.empty()) throw ConfigError("bench: netlist is required");
    CircuitBundle circuit = load_circuit(brc.netlist_path, brc.gummel_tol);

    CostReport report;
    report.n_em = scene.sys.n_interior;
    report.n_p = scene.coupling.n_ports();
    report.n_t = brc.n_steps;

    std::vector<long> gmres_per_port;
    ExtractOptions eopts;
    eopts.t_delta = brc.t_delta;
    eopts.workers = 1;  // timed sequentially so per-step cost is comparable
    eopts.gmres = brc.gmres;
    log << "bench: extraction\n";
    const auto t0 = std::chrono::steady_clock::now();
    const ImpulseArchive archive = extract(scene.sys, scene.basis, scene.coupling, brc.n_steps,
                                           eopts, scene.has_pml ? &scene.pml : nullptr,
                                           &gmres_per_port);
    const double extract_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const long extract_steps = static_cast<long>(report.n_p) * (brc.t_delta + brc.n_steps - 1);
    report.per_step_extract_s = extract_s / static_cast<double>(extract_steps);
    report.avg_gmres_extract =
        static_cast<double>(std::accumulate(gmres_per_port.begin(), gmres_per_port.end(), 0L)) /
        static_cast<double>(extract_steps);

    log << "bench: coupled\n";
    circuit.reset_devices();
    const TransientRecord coupled = run_coupled_record(brc, scene, circuit);
    log << "bench: replay\n";
    circuit.reset_devices();
    const TransientRecord replay = run_replay_record(brc, scene, archive, circuit);

    {
        auto mna = circuit.make_mna(scene.basis.dt, brc.newton, scene.coupling.labels());
        report.n_ckt = mna->n_unknowns();
    }
    const int steps_counted = brc.n_steps - 1;
    report.avg_newton_coupled =
        std::accumulate(coupled.newton_iterations.begin(), coupled.newton_iterations.end(), 0L) /
        static_cast<double>(steps_counted);
    report.avg_gmres_coupled =
        std::accumulate(coupled.gmres_iterations.begin(), coupled.gmres_iterations.end(), 0L) /
        static_cast<double>(steps_counted);
    report.per_step_coupled_s =
        std::accumulate(coupled.step_seconds.begin(), coupled.step_seconds.end(), 0.0) /
        steps_counted;
    report.per_step_replay_s =
        std::accumulate(replay.step_seconds.begin(), replay.step_seconds.end(), 0.0) /
        steps_counted;

    write_cost_report_csv(brc.out_dir + "/cost_report.csv", report);

    // cumulative linear-solve time against nonlinear iteration count
    {
        std::ofstream out = open_out(brc.out_dir + "/cumulative_time.csv");
        out << "iteration,cumulative_coupled_s,cumulative_replay_s\n";
        double cc = 0.0, cr = 0.0;
        long iter = 0;
        std::size_t rstep = 1;
        double replay_rate = report.per_step_replay_s;
        for (std::size_t i = 1; i < coupled.step_seconds.size(); ++i) {
            const int nl = std::max(1, coupled.newton_iterations[i]);
            const double per_iter = coupled.step_seconds[i] / nl;
            for (int k = 0; k < nl; ++k) {
                cc += per_iter;
                if (rstep < replay.step_seconds.size()) {
                    cr += replay.step_seconds[rstep];
                    ++rstep;
                } else {
                    cr += replay_rate;
                }
                ++iter;
                out << iter << ',' << fmt(cc) << ',' << fmt(cr) << '\n';
            }
        }
    }

    log << "bench: coupled " << fmt(report.per_step_coupled_s) << " s/step, replay "
        << fmt(report.per_step_replay_s) << " s/step, extract "
        << fmt(report.per_step_extract_s) << " s/step\n";
    return kExitOk;
}

}  // namespace

int run_mode(const RunConfig& rc, std::ostream& log) {
    std::filesystem::create_directories(rc.out_dir);
    if (rc.mode == "extract") {
        if (rc.archive_path.empty()) throw ConfigError("extract: archive path is required");
        Scene scene = build_scene(rc);
        ExtractOptions opts;
        opts.t_delta = rc.t_delta;
        opts.workers = rc.extract_workers;
        opts.gmres = rc.gmres;
        const ImpulseArchive a = extract(scene.sys, scene.basis, scene.coupling, rc.n_steps, opts,
                                         scene.has_pml ? &scene.pml : nullptr);
        a.write_file(rc.archive_path);
        log << "wrote archive " << rc.archive_path << " (" << a.n_ports() << " ports, "
            << a.n_lags() << " lags)\n";
        return kExitOk;
    }
    if (rc.mode == "coupled") {
        Scene scene = build_scene(rc);
        if (rc.netlist_path.empty()) throw ConfigError("coupled: netlist is required");
        CircuitBundle circuit = load_circuit(rc.netlist_path, rc.gummel_tol);
        const TransientRecord rec = run_coupled_record(rc, scene, circuit);
        write_waveform_csv(rc.out_dir + "/coupled_waveforms.csv", rec);
        write_spectra(rc, nullptr, rec, rc.out_dir + "/coupled");
        return kExitOk;
    }
    if (rc.mode == "replay") {
        Scene scene = build_scene(rc);
        if (rc.netlist_path.empty()) throw ConfigError("replay: netlist is required");
        if (rc.archive_path.empty()) throw ConfigError("replay: archive path is required");
        CircuitBundle circuit = load_circuit(rc.netlist_path, rc.gummel_tol);
        const ImpulseArchive archive = ImpulseArchive::read_file(rc.archive_path);
        if (std::abs(archive.dt() - scene.basis.dt) > 0.0)
            throw ConfigError("replay: archive dt does not match the configured dt");
        const TransientRecord rec = run_replay_record(rc, scene, archive, circuit);
        write_waveform_csv(rc.out_dir + "/replay_waveforms.csv", rec);
        write_spectra(rc, nullptr, rec, rc.out_dir + "/replay");
        return kExitOk;
    }
    if (rc.mode == "compare") return run_compare(rc, log);
    if (rc.mode == "bench") return run_bench(rc, log);
    throw ConfigError("unknown mode `" + rc.mode + "`");
}

}  // namespace emckt
