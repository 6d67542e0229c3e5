#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

namespace meshgrow {

using Vec3 = std::array<double, 3>;
using Face = std::array<int32_t, 3>;
// Undirected edge, stored with first < second.
using Edge = std::pair<int32_t, int32_t>;

// Triangle surface mesh with shared, fixed topology. Coordinates are in mm.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  int32_t vertex_count() const { return static_cast<int32_t>(vertices.size()); }
  int32_t face_count() const { return static_cast<int32_t>(faces.size()); }

  // Throws ContractError if any invariant is broken: empty vertex/face list,
  // face index out of range, repeated vertex within a face, non-finite coords.
  void validate() const;
};

// Sparse square matrix stored as coordinate triplets sorted by (row, col),
// with row offsets derived for row-major traversal.
struct SparseMatrix {
  struct Entry {
    int32_t row = 0;
    int32_t col = 0;
    double value = 0.0;
  };

  int32_t size = 0;  // N for an N x N matrix
  std::vector<Entry> entries;
  std::vector<int32_t> row_offsets;  // length N + 1

  static SparseMatrix from_entries(int32_t n, std::vector<Entry> entries);

  // Dense row-major copy; intended for tests and small diagnostics.
  std::vector<double> dense() const;
};

// Graph structure of one mesh topology: edge set, self-looped degrees and the
// normalized propagation operator P = D^{-1/2} (A + I) D^{-1/2}, where D is
// the degree matrix of A + I.
struct GraphTopology {
  int32_t vertex_count = 0;
  std::vector<Edge> edges;      // sorted, deduplicated
  std::vector<double> degree;   // self-loop included, so every entry >= 1
  std::shared_ptr<const SparseMatrix> propagation;

  static GraphTopology from_mesh(const Mesh& mesh);
  static GraphTopology from_edges(std::vector<Edge> edges, int32_t n);

  SparseMatrix adjacency() const;
  SparseMatrix self_loop_adjacency() const;
};

// Collects each triangle's three undirected edges, deduplicated and sorted.
// Throws ContractError on an index outside [0, vertex_count) or a degenerate
// face.
std::vector<Edge> edges_from_faces(const std::vector<Face>& faces,
                                   int32_t vertex_count);

// Exact symmetric-normalized self-looped adjacency. Throws ContractError for
// an empty graph (n == 0) or an edge index >= n.
SparseMatrix propagation_matrix(const std::vector<Edge>& edges, int32_t n);

// ASCII OBJ interchange: `v x y z` in mm and triangular `f i j k` (1-based).
// Normal/texture records are ignored on read. Parse failures name the line.
Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace meshgrow
