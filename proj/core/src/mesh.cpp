#include "emckt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "emckt/errors.hpp"

namespace emckt {

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

namespace {

constexpr std::array<std::array<int, 2>, 6> kLocalEdges = {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
constexpr std::array<std::array<int, 3>, 4> kLocalFaces = {{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

}  // namespace

TetMesh TetMesh::build_box(int nx, int ny, int nz, const Vec3& dims) {
    if (nx < 1 || ny < 1 || nz < 1) throw InvalidArgument("build_box: cell counts must be >= 1");
    if (!(dims.x > 0.0 && dims.y > 0.0 && dims.z > 0.0))
        throw InvalidArgument("build_box: box dimensions must be positive");

    TetMesh m;
    const double dx = dims.x / nx, dy = dims.y / ny, dz = dims.z / nz;
    auto vid = [&](int ix, int iy, int iz) { return ix + (nx + 1) * (iy + (ny + 1) * iz); };

    m.vertices_.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) * (nz + 1)));
    for (int iz = 0; iz <= nz; ++iz)
        for (int iy = 0; iy <= ny; ++iy)
            for (int ix = 0; ix <= nx; ++ix)
                m.vertices_.push_back({ix * dx, iy * dy, iz * dz});

    // Six tets per cell around the main diagonal c000 -> c111; vertex paths
    // follow the six axis orderings, which keeps shared-face diagonals
    // consistent between neighboring cells.
    constexpr std::array<std::array<int, 3>, 6> axis_orders = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    m.tets_.reserve(static_cast<std::size_t>(nx) * ny * nz * 6);
    for (int iz = 0; iz < nz; ++iz) {
        for (int iy = 0; iy < ny; ++iy) {
            for (int ix = 0; ix < nx; ++ix) {
                std::array<int, 8> c{};
                for (int b = 0; b < 8; ++b)
                    c[static_cast<std::size_t>(b)] =
                        vid(ix + (b & 1), iy + ((b >> 1) & 1), iz + ((b >> 2) & 1));
                for (const auto& ord : axis_orders) {
                    int bits = 0;
                    std::array<int, 4> tet{};
                    tet[0] = c[0];
                    for (int s = 0; s < 3; ++s) {
                        bits |= 1 << ord[static_cast<std::size_t>(s)];
                        tet[static_cast<std::size_t>(s) + 1] = c[static_cast<std::size_t>(bits)];
                    }
                    std::sort(tet.begin(), tet.end());
                    m.tets_.push_back(tet);
                }
            }
        }
    }
    m.tet_material_.assign(m.tets_.size(), 0);
    m.finalize();
    return m;
}

TetMesh TetMesh::read_ascii(std::istream& in) {
    std::string tag;
    int nv = 0, nt = 0;
    if (!(in >> tag >> nv >> nt) || tag != "tetmesh")
        throw ParseError("mesh: expected header `tetmesh <V> <T>`", 1);
    if (nv < 4 || nt < 1) throw ParseError("mesh: vertex/tet counts out of range", 1);
    TetMesh m;
    m.vertices_.resize(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) {
        if (!(in >> m.vertices_[static_cast<std::size_t>(i)].x >> m.vertices_[static_cast<std::size_t>(i)].y >>
              m.vertices_[static_cast<std::size_t>(i)].z))
            throw ParseError("mesh: bad vertex line", 2 + i);
    }
    m.tets_.resize(static_cast<std::size_t>(nt));
    m.tet_material_.resize(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) {
        auto& t = m.tets_[static_cast<std::size_t>(i)];
        if (!(in >> t[0] >> t[1] >> t[2] >> t[3] >> m.tet_material_[static_cast<std::size_t>(i)]))
            throw ParseError("mesh: bad tet line", 2 + nv + i);
        for (int v : t)
            if (v < 0 || v >= nv) throw ParseError("mesh: tet vertex id out of range", 2 + nv + i);
        std::sort(t.begin(), t.end());
        if (t[0] == t[1] || t[1] == t[2] || t[2] == t[3])
            throw ParseError("mesh: degenerate tet", 2 + nv + i);
    }
    m.finalize();
    return m;
}

TetMesh TetMesh::read_ascii_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("mesh: cannot open " + path);
    return read_ascii(in);
}

void TetMesh::write_ascii(std::ostream& out) const {
    out << "tetmesh " << n_vertices() << ' ' << n_tets() << '\n';
    char buf[96];
    for (const Vec3& v : vertices_) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (int t = 0; t < n_tets(); ++t) {
        const auto& tt = tets_[static_cast<std::size_t>(t)];
        out << tt[0] << ' ' << tt[1] << ' ' << tt[2] << ' ' << tt[3] << ' '
            << tet_material_[static_cast<std::size_t>(t)] << '\n';
    }
}

void TetMesh::finalize() {
    const int nv = n_vertices();
    const int nt = n_tets();

    std::vector<std::array<int, 2>> all_edges;
    all_edges.reserve(static_cast<std::size_t>(nt) * 6);
    std::vector<std::array<int, 3>> all_faces;
    all_faces.reserve(static_cast<std::size_t>(nt) * 4);
    for (const auto& t : tets_) {
        for (const auto& le : kLocalEdges)
            all_edges.push_back({t[static_cast<std::size_t>(le[0])], t[static_cast<std::size_t>(le[1])]});
        for (const auto& lf : kLocalFaces)
            all_faces.push_back({t[static_cast<std::size_t>(lf[0])], t[static_cast<std::size_t>(lf[1])],
                                 t[static_cast<std::size_t>(lf[2])]});
    }
    std::sort(all_edges.begin(), all_edges.end());
    all_edges.erase(std::unique(all_edges.begin(), all_edges.end()), all_edges.end());
    edges_ = std::move(all_edges);

    std::vector<std::array<int, 3>> sorted_faces = all_faces;
    std::sort(sorted_faces.begin(), sorted_faces.end());
    faces_.clear();
    std::vector<int> face_count;
    for (std::size_t i = 0; i < sorted_faces.size();) {
        std::size_t j = i;
        while (j < sorted_faces.size() && sorted_faces[j] == sorted_faces[i]) ++j;
        if (j - i > 2) throw TopologyError("mesh: face shared by more than two tets");
        faces_.push_back(sorted_faces[i]);
        face_count.push_back(static_cast<int>(j - i));
        i = j;
    }

    tet_edges_.resize(tets_.size());
    tet_faces_.resize(tets_.size());
    for (int t = 0; t < nt; ++t) {
        const auto& tt = tets_[static_cast<std::size_t>(t)];
        for (int k = 0; k < 6; ++k) {
            const int e = find_edge(tt[static_cast<std::size_t>(kLocalEdges[static_cast<std::size_t>(k)][0])],
                                    tt[static_cast<std::size_t>(kLocalEdges[static_cast<std::size_t>(k)][1])]);
            tet_edges_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = e;
        }
        for (int k = 0; k < 4; ++k) {
            const auto& lf = kLocalFaces[static_cast<std::size_t>(k)];
            const int f = find_face(tt[static_cast<std::size_t>(lf[0])], tt[static_cast<std::size_t>(lf[1])],
                                    tt[static_cast<std::size_t>(lf[2])]);
            tet_faces_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = f;
        }
        if (tet_volume(t) <= 0.0) throw TopologyError("mesh: zero-volume tet");
    }

    boundary_face_.assign(faces_.size(), 0);
    for (std::size_t f = 0; f < faces_.size(); ++f)
        if (face_count[f] == 1) boundary_face_[f] = 1;
    boundary_edge_.assign(edges_.size(), 0);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        if (!boundary_face_[f]) continue;
        const auto& fv = faces_[f];
        for (auto [a, b] : {std::pair{fv[0], fv[1]}, std::pair{fv[1], fv[2]}, std::pair{fv[0], fv[2]}})
            boundary_edge_[static_cast<std::size_t>(find_edge(a, b))] = 1;
    }

    edge_tets_.assign(edges_.size(), {});
    for (int t = 0; t < nt; ++t)
        for (int e : tet_edges_[static_cast<std::size_t>(t)])
            edge_tets_[static_cast<std::size_t>(e)].push_back(t);
    for (const auto& adj : edge_tets_)
        if (adj.empty()) throw TopologyError("mesh: dangling edge");

    // curl: face (a,b,c) = +(a,b) +(b,c) -(a,c)
    std::vector<Triplet> ct;
    ct.reserve(faces_.size() * 3);
    for (int f = 0; f < n_faces(); ++f) {
        const auto& fv = faces_[static_cast<std::size_t>(f)];
        ct.push_back({f, find_edge(fv[0], fv[1]), 1.0});
        ct.push_back({f, find_edge(fv[1], fv[2]), 1.0});
        ct.push_back({f, find_edge(fv[0], fv[2]), -1.0});
    }
    curl_ = SparseMatrix::from_triplets(n_faces(), n_edges(), std::move(ct));

    std::vector<Triplet> gt;
    gt.reserve(edges_.size() * 2);
    for (int e = 0; e < n_edges(); ++e) {
        gt.push_back({e, edges_[static_cast<std::size_t>(e)][0], -1.0});
        gt.push_back({e, edges_[static_cast<std::size_t>(e)][1], 1.0});
    }
    grad_ = SparseMatrix::from_triplets(n_edges(), nv, std::move(gt));
}

int TetMesh::find_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    const std::array<int, 2> key{a, b};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return -1;
    return static_cast<int>(it - edges_.begin());
}

int TetMesh::find_face(int a, int b, int c) const {
    std::array<int, 3> key{a, b, c};
    std::sort(key.begin(), key.end());
    auto it = std::lower_bound(faces_.begin(), faces_.end(), key);
    if (it == faces_.end() || *it != key) return -1;
    return static_cast<int>(it - faces_.begin());
}

double TetMesh::tet_volume(int t) const {
    const auto& tt = tets_[static_cast<std::size_t>(t)];
    const Vec3 a = vertex(tt[1]) - vertex(tt[0]);
    const Vec3 b = vertex(tt[2]) - vertex(tt[0]);
    const Vec3 c = vertex(tt[3]) - vertex(tt[0]);
    return std::abs(dot(a, cross(b, c))) / 6.0;
}

Vec3 TetMesh::tet_centroid(int t) const {
    const auto& tt = tets_[static_cast<std::size_t>(t)];
    Vec3 s{};
    for (int v : tt) s += vertex(v);
    return s * 0.25;
}

std::array<Vec3, 4> TetMesh::grad_lambda(int t) const {
    const auto& tt = tets_[static_cast<std::size_t>(t)];
    const Vec3 a = vertex(tt[1]) - vertex(tt[0]);
    const Vec3 b = vertex(tt[2]) - vertex(tt[0]);
    const Vec3 c = vertex(tt[3]) - vertex(tt[0]);
    const double det = dot(a, cross(b, c));
    std::array<Vec3, 4> g{};
    g[1] = cross(b, c) * (1.0 / det);
    g[2] = cross(c, a) * (1.0 / det);
    g[3] = cross(a, b) * (1.0 / det);
    g[0] = (g[1] + g[2] + g[3]) * -1.0;
    return g;
}

std::array<double, 4> TetMesh::barycentric(int t, const Vec3& r) const {
    const auto g = grad_lambda(t);
    const Vec3 r0 = vertex(tets_[static_cast<std::size_t>(t)][0]);
    std::array<double, 4> lam{};
    for (int i = 1; i < 4; ++i) lam[static_cast<std::size_t>(i)] = dot(g[static_cast<std::size_t>(i)], r - r0);
    lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
    return lam;
}

Vec3 TetMesh::edge_vector(int e) const {
    const auto& ev = edges_[static_cast<std::size_t>(e)];
    return vertex(ev[1]) - vertex(ev[0]);
}

double TetMesh::edge_length(int e) const { return norm(edge_vector(e)); }

Vec3 TetMesh::whitney_edge(int t, int e, const Vec3& r) const {
    const auto& te = tet_edges_[static_cast<std::size_t>(t)];
    int local = -1;
    for (int k = 0; k < 6; ++k)
        if (te[static_cast<std::size_t>(k)] == e) { local = k; break; }
    if (local < 0) return {};
    const auto lam = barycentric(t, r);
    const auto g = grad_lambda(t);
    const int a = kLocalEdges[static_cast<std::size_t>(local)][0];
    const int b = kLocalEdges[static_cast<std::size_t>(local)][1];
    return g[static_cast<std::size_t>(b)] * lam[static_cast<std::size_t>(a)] -
           g[static_cast<std::size_t>(a)] * lam[static_cast<std::size_t>(b)];
}

Vec3 TetMesh::whitney_face(int t, int f, const Vec3& r) const {
    const auto& tf = tet_faces_[static_cast<std::size_t>(t)];
    int local = -1;
    for (int k = 0; k < 4; ++k)
        if (tf[static_cast<std::size_t>(k)] == f) { local = k; break; }
    if (local < 0) return {};
    const auto lam = barycentric(t, r);
    const auto g = grad_lambda(t);
    const auto& lf = kLocalFaces[static_cast<std::size_t>(local)];
    const int a = lf[0], b = lf[1], c = lf[2];
    Vec3 w = cross(g[static_cast<std::size_t>(b)], g[static_cast<std::size_t>(c)]) * lam[static_cast<std::size_t>(a)];
    w += cross(g[static_cast<std::size_t>(c)], g[static_cast<std::size_t>(a)]) * lam[static_cast<std::size_t>(b)];
    w += cross(g[static_cast<std::size_t>(a)], g[static_cast<std::size_t>(b)]) * lam[static_cast<std::size_t>(c)];
    return w * 2.0;
}

int TetMesh::nearest_vertex(const Vec3& r, double* dist) const {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int v = 0; v < n_vertices(); ++v) {
        const double d = norm(vertex(v) - r);
        if (d < best_d) { best_d = d; best = v; }
    }
    if (dist) *dist = best_d;
    return best;
}

double whitney_edge_line_integral(const TetMesh& mesh, int edge_i, int edge_j) {
    if (edge_i < 0 || edge_i >= mesh.n_edges() || edge_j < 0 || edge_j >= mesh.n_edges())
        throw InvalidArgument("whitney_edge_line_integral: edge id out of range");
    // find a tet shared by both edges
    int shared = -1;
    for (int t : mesh.edge_tets(edge_i)) {
        for (int e : mesh.tet_edges(t)) {
            if (e == edge_j) { shared = t; break; }
        }
        if (shared >= 0) break;
    }
    if (shared < 0) return 0.0;

    // integrand is affine along the edge; 2-point Gauss is exact
    const auto& ev = mesh.edge(edge_i);
    const Vec3 p0 = mesh.vertex(ev[0]);
    const Vec3 tangent = mesh.vertex(ev[1]) - p0;
    constexpr double g1 = 0.5 - 0.28867513459481287;  // (1 -/+ 1/sqrt(3))/2
    constexpr double g2 = 0.5 + 0.28867513459481287;
    double acc = 0.0;
    for (double s : {g1, g2}) {
        const Vec3 r = p0 + tangent * s;
        acc += 0.5 * dot(mesh.whitney_edge(shared, edge_j, r), tangent);
    }
    return acc;
}

std::pair<SparseMatrix, SparseMatrix> derive_incidence(const TetMesh& mesh) {
    std::vector<Triplet> ct;
    for (int f = 0; f < mesh.n_faces(); ++f) {
        const auto& fv = mesh.face(f);
        const int e01 = mesh.find_edge(fv[0], fv[1]);
        const int e12 = mesh.find_edge(fv[1], fv[2]);
        const int e02 = mesh.find_edge(fv[0], fv[2]);
        if (e01 < 0 || e12 < 0 || e02 < 0) throw TopologyError("derive_incidence: face edge missing");
        ct.push_back({f, e01, 1.0});
        ct.push_back({f, e12, 1.0});
        ct.push_back({f, e02, -1.0});
    }
    std::vector<Triplet> gt;
    for (int e = 0; e < mesh.n_edges(); ++e) {
        gt.push_back({e, mesh.edge(e)[0], -1.0});
        gt.push_back({e, mesh.edge(e)[1], 1.0});
    }
    return {SparseMatrix::from_triplets(mesh.n_faces(), mesh.n_edges(), std::move(ct)),
            SparseMatrix::from_triplets(mesh.n_edges(), mesh.n_vertices(), std::move(gt))};
}

PortSpec resolve_port(const TetMesh& mesh, const Vec3& a, const Vec3& b, int id,
                      const std::string& label) {
    const Vec3 ab = b - a;
    const double len = norm(ab);
    if (len <= kPortSnapTolerance) throw InvalidArgument("resolve_port: degenerate segment");

    double da = 0.0, db = 0.0;
    mesh.nearest_vertex(a, &da);
    mesh.nearest_vertex(b, &db);
    if (da > kPortSnapTolerance || db > kPortSnapTolerance)
        throw ConfigError("resolve_port: segment endpoints do not coincide with mesh vertices");

    // collect vertices on the segment, ordered by arc parameter
    std::vector<std::pair<double, int>> on_segment;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        const Vec3 d = mesh.vertex(v) - a;
        const double t = dot(d, ab) / (len * len);
        if (t < -kPortSnapTolerance / len || t > 1.0 + kPortSnapTolerance / len) continue;
        const double off = norm(d - ab * t);
        if (off <= kPortSnapTolerance) on_segment.emplace_back(t, v);
    }
    std::sort(on_segment.begin(), on_segment.end());
    if (on_segment.size() < 2) throw ConfigError("resolve_port: no mesh vertices along segment");

    PortSpec spec;
    spec.id = id;
    spec.label = label;
    for (std::size_t k = 0; k + 1 < on_segment.size(); ++k) {
        const int va = on_segment[k].second;
        const int vb = on_segment[k + 1].second;
        const int e = mesh.find_edge(va, vb);
        if (e < 0)
            throw ConfigError("resolve_port: consecutive on-segment vertices are not joined by a mesh edge");
        const int sign = (mesh.edge(e)[0] == va) ? 1 : -1;
        spec.edges.emplace_back(e, sign);
    }
    return spec;
}

}  // namespace emckt
