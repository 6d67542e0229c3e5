#include "meshgrow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "meshgrow/errors.hpp"
#include "meshgrow/parallel.hpp"

namespace meshgrow {

namespace {

double sq_dist(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

double min_dist_to_set(const Vec3& p, const std::vector<Vec3>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set) best = std::min(best, sq_dist(p, q));
  return std::sqrt(best);
}

// Distance from a point to the segment [a, b].
double point_segment_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  Vec3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double denom = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = denom > 0.0
                 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / denom
                 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 closest{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
  return std::sqrt(sq_dist(p, closest));
}

}  // namespace

double mae(const Mesh& predicted, const Mesh& target) {
  if (predicted.vertices.size() != target.vertices.size()) {
    throw ContractError("mae: vertex counts differ");
  }
  if (predicted.vertices.empty()) throw ContractError("mae: empty mesh");
  double acc = 0.0;
  for (size_t i = 0; i < predicted.vertices.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      acc += std::abs(predicted.vertices[i][c] - target.vertices[i][c]);
    }
  }
  return acc / static_cast<double>(predicted.vertices.size() * 3);
}

double chamfer_distance(const Mesh& a, const Mesh& b) {
  if (a.vertices.empty() || b.vertices.empty()) {
    throw ContractError("chamfer_distance: empty vertex set");
  }
  double a_to_b = 0.0;
  for (const auto& p : a.vertices) a_to_b += min_dist_to_set(p, b.vertices);
  a_to_b /= static_cast<double>(a.vertices.size());
  double b_to_a = 0.0;
  for (const auto& p : b.vertices) b_to_a += min_dist_to_set(p, a.vertices);
  b_to_a /= static_cast<double>(b.vertices.size());
  return 0.5 * (a_to_b + b_to_a);
}

double hausdorff(const Mesh& a, const Mesh& b) {
  if (a.vertices.empty() || b.vertices.empty()) {
    throw ContractError("hausdorff: empty vertex set");
  }
  double a_to_b = 0.0;
  for (const auto& p : a.vertices) {
    a_to_b = std::max(a_to_b, min_dist_to_set(p, b.vertices));
  }
  double b_to_a = 0.0;
  for (const auto& p : b.vertices) {
    b_to_a = std::max(b_to_a, min_dist_to_set(p, a.vertices));
  }
  return std::max(a_to_b, b_to_a);
}

double mis_diameter(const Mesh& mesh, int32_t n_rings, int32_t ring_size) {
  if (n_rings < 1 || ring_size < 3) {
    throw ContractError("mis_diameter: invalid ring grid");
  }
  if (mesh.vertex_count() != n_rings * ring_size) {
    throw ContractError("mis_diameter: vertex count " +
                        std::to_string(mesh.vertex_count()) +
                        " does not match " + std::to_string(n_rings) + "x" +
                        std::to_string(ring_size) + " grid");
  }
  double max_radius = 0.0;
  for (int32_t r = 0; r < n_rings; ++r) {
    const Vec3* ring = mesh.vertices.data() + static_cast<size_t>(r) * ring_size;
    Vec3 centroid{0, 0, 0};
    for (int32_t j = 0; j < ring_size; ++j) {
      for (int c = 0; c < 3; ++c) centroid[c] += ring[j][c];
    }
    for (int c = 0; c < 3; ++c) centroid[c] /= ring_size;
    double radius = std::numeric_limits<double>::infinity();
    for (int32_t j = 0; j < ring_size; ++j) {
      radius = std::min(radius, point_segment_dist(centroid, ring[j],
                                                   ring[(j + 1) % ring_size]));
    }
    max_radius = std::max(max_radius, radius);
  }
  return 2.0 * max_radius;
}

EvalReport EvalReport::aggregate(std::vector<SampleMetrics> samples) {
  EvalReport report;
  report.samples = std::move(samples);
  auto summarize = [&](auto field) {
    MetricSummary s;
    const double n = static_cast<double>(report.samples.size());
    if (n == 0) return s;
    for (const auto& r : report.samples) s.mean += r.*field;
    s.mean /= n;
    double var = 0.0;
    for (const auto& r : report.samples) {
      const double d = r.*field - s.mean;
      var += d * d;
    }
    s.std_dev = std::sqrt(var / n);
    return s;
  };
  report.mae = summarize(&SampleMetrics::mae);
  report.cd = summarize(&SampleMetrics::cd);
  report.hd = summarize(&SampleMetrics::hd);
  report.mis_err = summarize(&SampleMetrics::mis_err);
  return report;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "pair_id,delta_months,mae,cd,hd,mis_pred,mis_gt,mis_err\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  s.pair_id.c_str(), s.delta_months, s.mae, s.cd, s.hd,
                  s.mis_pred, s.mis_gt, s.mis_err);
    out << buf;
  }
}

void EvalReport::write_summary_json(const std::filesystem::path& path) const {
  nlohmann::json j;
  auto put = [&](const char* name, const MetricSummary& s) {
    j[name] = {{"mean", s.mean}, {"std", s.std_dev}};
  };
  put("mae", mae);
  put("cd", cd);
  put("hd", hd);
  put("mis_err", mis_err);
  j["samples"] = samples.size();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

EvalReport evaluate(const std::vector<EvalPair>& pairs, const PredictFn& predict,
                    int32_t n_rings, int32_t ring_size) {
  if (pairs.empty()) throw ContractError("evaluate: no pairs");
  std::vector<SampleMetrics> samples(pairs.size());
  // Per-pair work is pure; fan out across workers, one slot per pair.
  parallel_for(0, static_cast<int64_t>(pairs.size()), [&](int64_t i) {
    const auto& pair = pairs[i];
    const Mesh predicted = predict(pair);
    SampleMetrics s;
    s.pair_id = pair.pair_id;
    s.delta_months = pair.delta_months;
    s.mae = mae(predicted, *pair.target);
    s.cd = chamfer_distance(predicted, *pair.target);
    s.hd = hausdorff(predicted, *pair.target);
    s.mis_pred = mis_diameter(predicted, n_rings, ring_size);
    s.mis_gt = mis_diameter(*pair.target, n_rings, ring_size);
    s.mis_err = std::abs(s.mis_pred - s.mis_gt);
    samples[i] = std::move(s);
  });
  return EvalReport::aggregate(std::move(samples));
}

}  // namespace meshgrow
