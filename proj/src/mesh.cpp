#include "meshgrow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "meshgrow/errors.hpp"

namespace meshgrow {

void Mesh::validate() const {
  if (vertices.empty()) throw ContractError("mesh: no vertices");
  if (faces.empty()) throw ContractError("mesh: no faces");
  for (const auto& v : vertices) {
    for (double c : v) {
      if (!std::isfinite(c)) throw ContractError("mesh: non-finite coordinate");
    }
  }
  const auto n = vertex_count();
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (int32_t idx : face) {
      if (idx < 0 || idx >= n) {
        throw ContractError("mesh: face " + std::to_string(f) +
                            " index out of range");
      }
    }
    if (face[0] == face[1] || face[0] == face[2] || face[1] == face[2]) {
      throw ContractError("mesh: face " + std::to_string(f) +
                          " repeats a vertex");
    }
  }
}

SparseMatrix SparseMatrix::from_entries(int32_t n,
                                        std::vector<Entry> entries) {
  SparseMatrix m;
  m.size = n;
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  m.entries = std::move(entries);
  m.row_offsets.assign(static_cast<size_t>(n) + 1, 0);
  for (const auto& e : m.entries) m.row_offsets[static_cast<size_t>(e.row) + 1]++;
  for (int32_t i = 0; i < n; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
  return m;
}

std::vector<double> SparseMatrix::dense() const {
  std::vector<double> d(static_cast<size_t>(size) * size, 0.0);
  for (const auto& e : entries) {
    d[static_cast<size_t>(e.row) * size + e.col] = e.value;
  }
  return d;
}

std::vector<Edge> edges_from_faces(const std::vector<Face>& faces,
                                   int32_t vertex_count) {
  std::vector<Edge> edges;
  edges.reserve(faces.size() * 3);
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (int32_t idx : face) {
      if (idx < 0 || idx >= vertex_count) {
        throw ContractError("edges_from_faces: face " + std::to_string(f) +
                            " index " + std::to_string(idx) +
                            " out of range [0, " +
                            std::to_string(vertex_count) + ")");
      }
    }
    for (int k = 0; k < 3; ++k) {
      int32_t a = face[k];
      int32_t b = face[(k + 1) % 3];
      if (a == b) {
        throw ContractError("edges_from_faces: face " + std::to_string(f) +
                            " has a self-edge");
      }
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

SparseMatrix propagation_matrix(const std::vector<Edge>& edges, int32_t n) {
  if (n <= 0) throw ContractError("propagation_matrix: empty graph");
  std::vector<double> degree(static_cast<size_t>(n), 1.0);  // self-loop
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw ContractError("propagation_matrix: edge index out of range");
    }
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(edges.size() * 2 + static_cast<size_t>(n));
  for (int32_t i = 0; i < n; ++i) {
    entries.push_back({i, i, 1.0 / degree[i]});
  }
  for (const auto& [a, b] : edges) {
    const double v = 1.0 / std::sqrt(degree[a] * degree[b]);
    entries.push_back({a, b, v});
    entries.push_back({b, a, v});
  }
  return SparseMatrix::from_entries(n, std::move(entries));
}

GraphTopology GraphTopology::from_edges(std::vector<Edge> edges, int32_t n) {
  GraphTopology topo;
  topo.vertex_count = n;
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  topo.propagation = std::make_shared<const SparseMatrix>(
      propagation_matrix(edges, n));
  topo.degree.assign(static_cast<size_t>(n), 1.0);
  for (const auto& [a, b] : edges) {
    topo.degree[a] += 1.0;
    topo.degree[b] += 1.0;
  }
  topo.edges = std::move(edges);
  return topo;
}

GraphTopology GraphTopology::from_mesh(const Mesh& mesh) {
  mesh.validate();
  return from_edges(edges_from_faces(mesh.faces, mesh.vertex_count()),
                    mesh.vertex_count());
}

SparseMatrix GraphTopology::adjacency() const {
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    entries.push_back({a, b, 1.0});
    entries.push_back({b, a, 1.0});
  }
  return SparseMatrix::from_entries(vertex_count, std::move(entries));
}

SparseMatrix GraphTopology::self_loop_adjacency() const {
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(edges.size() * 2 + static_cast<size_t>(vertex_count));
  for (int32_t i = 0; i < vertex_count; ++i) entries.push_back({i, i, 1.0});
  for (const auto& [a, b] : edges) {
    entries.push_back({a, b, 1.0});
    entries.push_back({b, a, 1.0});
  }
  return SparseMatrix::from_entries(vertex_count, std::move(entries));
}

namespace {

// Splits a face vertex reference like "12/3/4" and returns the vertex part.
int64_t parse_face_index(const std::string& token, size_t line_no) {
  const auto slash = token.find('/');
  const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
  try {
    size_t pos = 0;
    const int64_t value = std::stoll(head, &pos);
    if (pos != head.size()) throw std::invalid_argument(head);
    return value;
  } catch (const std::exception&) {
    throw ParseError("obj: bad face index '" + token + "' at line " +
                     std::to_string(line_no));
  }
}

}  // namespace

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("obj: cannot open " + path.string());
  Mesh mesh;
  std::vector<std::pair<Face, size_t>> raw_faces;  // face with its line number
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v{};
      if (!(ss >> v[0] >> v[1] >> v[2])) {
        throw ParseError("obj: malformed vertex at line " +
                         std::to_string(line_no));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int64_t> idx;
      std::string token;
      while (ss >> token) idx.push_back(parse_face_index(token, line_no));
      if (idx.size() != 3) {
        throw ParseError("obj: non-triangle face at line " +
                         std::to_string(line_no));
      }
      raw_faces.push_back(
          {{static_cast<int32_t>(idx[0]), static_cast<int32_t>(idx[1]),
            static_cast<int32_t>(idx[2])},
           line_no});
    }
    // vn / vt / usemtl / other records are ignored.
  }
  const int64_t n = static_cast<int64_t>(mesh.vertices.size());
  mesh.faces.reserve(raw_faces.size());
  for (const auto& [face, fline] : raw_faces) {
    Face zero_based;
    for (int k = 0; k < 3; ++k) {
      const int64_t one_based = face[k];
      if (one_based < 1 || one_based > n) {
        throw ParseError("obj: face index out of range at line " +
                         std::to_string(fline));
      }
      zero_based[k] = static_cast<int32_t>(one_based - 1);
    }
    mesh.faces.push_back(zero_based);
  }
  mesh.validate();
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  mesh.validate();
  std::ofstream out(path);
  if (!out) throw IoError("obj: cannot write " + path.string());
  char buf[160];
  for (const auto& v : mesh.vertices) {
    // %.17g round-trips doubles exactly
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v[0], v[1], v[2]);
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw IoError("obj: write failed for " + path.string());
}

}  // namespace meshgrow
