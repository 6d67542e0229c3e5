#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "meshgrow/condition.hpp"
#include "meshgrow/mesh.hpp"

namespace meshgrow {

// Mean absolute difference over all 3N coordinates, mm. Requires vertex
// correspondence (equal counts, shared ordering).
double mae(const Mesh& predicted, const Mesh& target);

// Metric twins of the training losses, brute-force O(N*M), mm.
double chamfer_distance(const Mesh& a, const Mesh& b);
double hausdorff(const Mesh& a, const Mesh& b);

// Maximally-inscribed-sphere diameter of a tube mesh with ring-grid topology
// (n_rings x ring_size vertices, ring-major order): per ring, the distance
// from the ring centroid to the ring's boundary polyline; the MIS diameter is
// twice the largest such radius. A regular ring of circumradius r yields
// r*cos(pi/ring_size).
double mis_diameter(const Mesh& mesh, int32_t n_rings, int32_t ring_size);

// One evaluated pair plus the aggregate report of a test run.
struct SampleMetrics {
  std::string pair_id;
  int delta_months = 0;
  double mae = 0.0;
  double cd = 0.0;
  double hd = 0.0;
  double mis_pred = 0.0;
  double mis_gt = 0.0;
  double mis_err = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double std_dev = 0.0;  // population standard deviation
};

struct EvalReport {
  std::vector<SampleMetrics> samples;
  MetricSummary mae, cd, hd, mis_err;

  static EvalReport aggregate(std::vector<SampleMetrics> samples);

  void write_csv(const std::filesystem::path& path) const;
  void write_summary_json(const std::filesystem::path& path) const;
};

// Everything evaluate() needs about one test pair. The predictor returns the
// predicted mesh for the source + condition; the target carries ground truth.
struct EvalPair {
  std::string pair_id;
  int delta_months = 0;
  const Mesh* source = nullptr;
  const Mesh* target = nullptr;
  std::optional<ClinicalCondition> condition;  // set for model-backed runs
};

using PredictFn = std::function<Mesh(const EvalPair&)>;

// Runs the predictor over every pair and aggregates all four metrics.
// mis_gt is measured on the target mesh so that prediction and ground truth
// share the same ring discretization.
EvalReport evaluate(const std::vector<EvalPair>& pairs, const PredictFn& predict,
                    int32_t n_rings, int32_t ring_size);

}  // namespace meshgrow
