#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "meshgrow/errors.hpp"
#include "meshgrow/mesh.hpp"
#include "meshgrow/rng.hpp"
#include "meshgrow/synth.hpp"

using namespace meshgrow;

namespace {

// Independent dense oracle for the propagation operator.
std::vector<double> dense_propagation_oracle(const std::vector<Edge>& edges,
                                             int n) {
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
  for (const auto& [u, v] : edges) {
    a[u * n + v] = 1.0;
    a[v * n + u] = 1.0;
  }
  for (int i = 0; i < n; ++i) a[i * n + i] = 1.0;  // self loops
  std::vector<double> deg(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) deg[i] += a[i * n + j];
  }
  std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      p[i * n + j] = a[i * n + j] / std::sqrt(deg[i] * deg[j]);
    }
  }
  return p;
}

std::vector<Edge> random_edges(Rng& rng, int n, double density) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < density) edges.emplace_back(i, j);
    }
  }
  return edges;
}

}  // namespace

TEST_CASE("edges_from_faces: single triangle") {
  const auto edges = edges_from_faces({{0, 1, 2}}, 3);
  CHECK(edges == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("edges_from_faces: shared edge not duplicated") {
  const auto edges = edges_from_faces({{0, 1, 2}, {1, 2, 3}}, 4);
  CHECK(edges.size() == 5);
  CHECK(std::count(edges.begin(), edges.end(), Edge{1, 2}) == 1);
}

TEST_CASE("edges_from_faces: tube mesh matches brute-force enumeration") {
  const Mesh tube = tube_mesh([](double) { return 10.0; }, 4, 3, 30.0);
  REQUIRE(tube.vertex_count() == 12);
  const auto edges = edges_from_faces(tube.faces, tube.vertex_count());

  std::set<Edge> brute;  // direct enumeration of all face edges
  for (const auto& f : tube.faces) {
    brute.insert({std::min(f[0], f[1]), std::max(f[0], f[1])});
    brute.insert({std::min(f[1], f[2]), std::max(f[1], f[2])});
    brute.insert({std::min(f[0], f[2]), std::max(f[0], f[2])});
  }
  CHECK(edges.size() == brute.size());
  CHECK(std::set<Edge>(edges.begin(), edges.end()) == brute);
}

TEST_CASE("edges_from_faces: order independent") {
  Rng rng(7);
  const Mesh tube = tube_mesh([](double) { return 10.0; }, 5, 4, 30.0);
  auto faces = tube.faces;
  rng.shuffle(faces.begin(), faces.end());
  CHECK(edges_from_faces(faces, tube.vertex_count()) ==
        edges_from_faces(tube.faces, tube.vertex_count()));
}

TEST_CASE("edges_from_faces: index out of range") {
  CHECK_THROWS_AS(edges_from_faces({{0, 1, 5}}, 3), ContractError);
}

TEST_CASE("propagation_matrix: isolated vertex") {
  const auto p = propagation_matrix({}, 1);
  REQUIRE(p.entries.size() == 1);
  CHECK(p.entries[0].value == doctest::Approx(1.0));
}

TEST_CASE("propagation_matrix: fully connected triangle is uniform 1/3") {
  const auto p = propagation_matrix({{0, 1}, {0, 2}, {1, 2}}, 3);
  const auto d = p.dense();
  for (double v : d) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("propagation_matrix: empty graph rejected") {
  CHECK_THROWS_AS(propagation_matrix({}, 0), ContractError);
}

TEST_CASE("propagation_matrix: random graph matches dense oracle") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 20;
    const auto edges = random_edges(rng, n, 0.2);
    const auto p = propagation_matrix(edges, n).dense();
    const auto oracle = dense_propagation_oracle(edges, n);
    for (size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(p[i] - oracle[i]) < 1e-12);
    }
  }
}

TEST_CASE("propagation matrix properties on random graphs") {
  Rng rng(99);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 50));
    const auto edges = random_edges(rng, n, 0.15);
    const auto p = propagation_matrix(edges, n);

    // symmetric, entries in (0, 1]
    const auto d = p.dense();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        CHECK(d[i * n + j] == d[j * n + i]);
      }
    }
    for (const auto& e : p.entries) {
      CHECK(e.value > 0.0);
      CHECK(e.value <= 1.0);
    }

    // eigenvalues within [-1, 1]
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = d[i * n + j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    for (int i = 0; i < n; ++i) {
      CHECK(solver.eigenvalues()(i) >= -1.0 - 1e-12);
      CHECK(solver.eigenvalues()(i) <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("propagation on a regular graph: rows sum to 1, constants fixed") {
  // Cycle graph: every vertex has degree 3 after the self loop.
  const int n = 12;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    edges.emplace_back(std::min(i, (i + 1) % n), std::max(i, (i + 1) % n));
  }
  std::sort(edges.begin(), edges.end());
  const auto p = propagation_matrix(edges, n);
  const auto d = p.dense();
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += d[i * n + j];
    CHECK(row == doctest::Approx(1.0).epsilon(1e-13));
  }
  // P c = c for a constant signal
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += d[i * n + j] * 5.0;
    CHECK(acc == doctest::Approx(5.0).epsilon(1e-13));
  }
}

TEST_CASE("graph topology fields are consistent") {
  const Mesh tube = tube_mesh([](double) { return 12.0; }, 4, 4, 30.0);
  const auto topo = GraphTopology::from_mesh(tube);
  CHECK(topo.vertex_count == 16);
  for (double deg : topo.degree) CHECK(deg >= 1.0);

  const auto a = topo.adjacency().dense();
  const auto abar = topo.self_loop_adjacency().dense();
  const int n = topo.vertex_count;
  for (int i = 0; i < n; ++i) {
    CHECK(a[i * n + i] == 0.0);
    CHECK(abar[i * n + i] == 1.0);
    double deg = 0.0;
    for (int j = 0; j < n; ++j) {
      CHECK(a[i * n + j] == a[j * n + i]);
      deg += abar[i * n + j];
    }
    CHECK(deg == doctest::Approx(topo.degree[i]));
  }
}

TEST_CASE("mesh validate rejects bad faces") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 1}};
  CHECK_THROWS_AS(m.validate(), ContractError);
  m.faces = {{0, 1, 3}};
  CHECK_THROWS_AS(m.validate(), ContractError);
  m.faces = {{0, 1, 2}};
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("obj round trip: tetrahedron") {
  Mesh m;
  m.vertices = {{0.123456789, -1.5, 2.0},
                {10.0000001, 0.25, -3.75},
                {-4.2, 8.125, 0.0},
                {1.0, 1.0, 1.0}};
  m.faces = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  const auto path = std::filesystem::temp_directory_path() / "mg_tet.obj";
  save_mesh(m, path);
  const Mesh back = load_mesh(path);
  REQUIRE(back.faces == m.faces);
  REQUIRE(back.vertices.size() == m.vertices.size());
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(back.vertices[i][c] - m.vertices[i][c]) < 1e-6);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("obj: quad face rejected with line number") {
  const auto path = std::filesystem::temp_directory_path() / "mg_quad.obj";
  {
    std::ofstream out(path);
    out << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  }
  CHECK_THROWS_WITH_AS(load_mesh(path),
                       doctest::Contains("non-triangle face at line 5"),
                       ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("obj: 1-based indices map to 0-based, vn/vt ignored") {
  const auto path = std::filesystem::temp_directory_path() / "mg_onebased.obj";
  {
    std::ofstream out(path);
    out << "# comment\nv 0 0 0\nvn 0 0 1\nv 1 0 0\nvt 0.5 0.5\nv 0 1 0\n"
        << "f 1/1/1 2/2/1 3/3/1\n";
  }
  const Mesh m = load_mesh(path);
  CHECK(m.faces == std::vector<Face>{{0, 1, 2}});
  std::filesystem::remove(path);
}

TEST_CASE("obj: malformed and out-of-range records name the line") {
  const auto path = std::filesystem::temp_directory_path() / "mg_bad.obj";
  {
    std::ofstream out(path);
    out << "v 0 0 0\nv 1 0\n";
  }
  CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("line 2"),
                       ParseError);
  {
    std::ofstream out(path);
    out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
  }
  CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("line 4"),
                       ParseError);
  std::filesystem::remove(path);
}
