#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emckt/sparse.hpp"

namespace emckt {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(const Vec3& a);

/// Immutable tetrahedral mesh with global edge/face numbering.
///
/// Conventions: tet vertex ids are stored ascending; edges are ordered
/// low-id -> high-id; faces ascending triples. With those choices every
/// local edge/face of a tet is aligned with its global orientation, so no
/// per-tet sign tables are needed.
class TetMesh {
public:
    /// Structured box mesher: each hexahedral cell is split into six
    /// tetrahedra sharing the cell's main diagonal. Face diagonals agree
    /// between neighboring cells, so the mesh is conforming.
    static TetMesh build_box(int nx, int ny, int nz, const Vec3& dims);

    /// ASCII format: `tetmesh <V> <T>`, V lines `x y z`, T lines
    /// `v0 v1 v2 v3 material_id`.
    static TetMesh read_ascii(std::istream& in);
    static TetMesh read_ascii_file(const std::string& path);
    void write_ascii(std::ostream& out) const;

    int n_vertices() const { return static_cast<int>(vertices_.size()); }
    int n_tets() const { return static_cast<int>(tets_.size()); }
    int n_edges() const { return static_cast<int>(edges_.size()); }
    int n_faces() const { return static_cast<int>(faces_.size()); }

    const Vec3& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
    const std::array<int, 4>& tet(int t) const { return tets_[static_cast<std::size_t>(t)]; }
    int tet_material(int t) const { return tet_material_[static_cast<std::size_t>(t)]; }
    const std::array<int, 2>& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
    const std::array<int, 3>& face(int f) const { return faces_[static_cast<std::size_t>(f)]; }

    /// Global ids of a tet's six edges, local order (01,02,03,12,13,23).
    const std::array<int, 6>& tet_edges(int t) const { return tet_edges_[static_cast<std::size_t>(t)]; }
    /// Global ids of a tet's four faces, local order (123,023,013,012).
    const std::array<int, 4>& tet_faces(int t) const { return tet_faces_[static_cast<std::size_t>(t)]; }

    bool edge_on_boundary(int e) const { return boundary_edge_[static_cast<std::size_t>(e)] != 0; }
    bool face_on_boundary(int f) const { return boundary_face_[static_cast<std::size_t>(f)] != 0; }

    /// Face-by-edge signed incidence (+1,+1,-1 per row); the discrete curl.
    const SparseMatrix& curl_incidence() const { return curl_; }
    /// Edge-by-vertex signed incidence (-1 at tail, +1 at head); discrete grad.
    const SparseMatrix& grad_incidence() const { return grad_; }

    int find_edge(int a, int b) const;   ///< -1 if absent; order-insensitive
    int find_face(int a, int b, int c) const;

    double tet_volume(int t) const;
    Vec3 tet_centroid(int t) const;
    /// Barycentric gradients of the four vertex functions; constant per tet.
    std::array<Vec3, 4> grad_lambda(int t) const;
    /// Barycentric coordinates of a point with respect to tet t.
    std::array<double, 4> barycentric(int t, const Vec3& r) const;

    /// Edge vector head - tail in the global (low -> high id) orientation.
    Vec3 edge_vector(int e) const;
    double edge_length(int e) const;

    /// Whitney edge function of global edge e evaluated inside tet t.
    /// Zero vector if e is not an edge of t.
    Vec3 whitney_edge(int t, int e, const Vec3& r) const;
    /// Whitney face function of global face f evaluated inside tet t.
    Vec3 whitney_face(int t, int f, const Vec3& r) const;

    /// Closest vertex id to r; distance returned through *dist if non-null.
    int nearest_vertex(const Vec3& r, double* dist = nullptr) const;

    /// Tets adjacent to an edge.
    const std::vector<int>& edge_tets(int e) const { return edge_tets_[static_cast<std::size_t>(e)]; }

private:
    void finalize();  ///< derives edges/faces/incidence; validates topology

    std::vector<Vec3> vertices_;
    std::vector<std::array<int, 4>> tets_;
    std::vector<int> tet_material_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> faces_;
    std::vector<std::array<int, 6>> tet_edges_;
    std::vector<std::array<int, 4>> tet_faces_;
    std::vector<std::uint8_t> boundary_edge_;
    std::vector<std::uint8_t> boundary_face_;
    std::vector<std::vector<int>> edge_tets_;
    SparseMatrix curl_;
    SparseMatrix grad_;
};

/// Signed line integral of Whitney basis W1_j along edge i (i's orientation),
/// by Gauss quadrature on a tet shared by both edges. 0 when no tet is shared.
double whitney_edge_line_integral(const TetMesh& mesh, int edge_i, int edge_j);

/// Rebuilds the signed incidence matrices from mesh connectivity.
/// Provided as a free operation so their defining identities can be checked
/// independently of the cached copies inside TetMesh.
std::pair<SparseMatrix, SparseMatrix> derive_incidence(const TetMesh& mesh);

/// An oriented chain of mesh edges acting as one lumped port.
struct PortSpec {
    int id = -1;
    std::string label;
    /// (edge id, sign): +1 when the global edge orientation agrees with the
    /// port direction A -> B.
    std::vector<std::pair<int, int>> edges;
};

/// Snap tolerance for port endpoint/vertex matching, in meters.
inline constexpr double kPortSnapTolerance = 1e-9;

/// Resolves a straight segment A->B into the chain of mesh edges lying on it.
PortSpec resolve_port(const TetMesh& mesh, const Vec3& a, const Vec3& b,
                      int id = 0, const std::string& label = {});

}  // namespace emckt
