#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshgrow/condition.hpp"
#include "meshgrow/mesh.hpp"

namespace meshgrow {

// Radius profile of the synthetic vessel: a base tube with one Gaussian
// bulge whose amplitude grows linearly in months since the first scan. The
// growth rate depends on age and sex, so the covariates carry real signal.
struct GrowthModel {
  double base_radius_mm = 15.0;   // r0
  double growth_rate_mm = 0.15;   // g0, mm/month
  double gamma_age = 0.5;
  double gamma_sex = 0.3;         // male offset
  double amplitude_min_mm = 2.0;  // A0 sampling range
  double amplitude_max_mm = 8.0;
  double sigma_min_mm = 12.0;     // bulge width range
  double sigma_max_mm = 20.0;
  double axis_length_mm = 100.0;

  // g = g0 * (1 + gamma_age * (age0 - 60) / 30 + gamma_sex * [male])
  double rate_for(int age0_years, Sex sex) const {
    return growth_rate_mm *
           (1.0 + gamma_age * (age0_years - 60) / 30.0 +
            gamma_sex * (sex == Sex::kMale ? 1.0 : 0.0));
  }
};

// One patient's geometry: bulge placement plus centerline curvature. The
// bulge center sits exactly on a ring coordinate so the analytic peak is
// realized by a sampled ring.
struct PatientGeometry {
  double amplitude0_mm = 4.0;  // A0
  double sigma_mm = 15.0;
  double bulge_center_mm = 50.0;  // s0, on-grid
  double arc_radius_mm = 0.0;     // 0 = straight axis
};

struct ScanRecord {
  int scan_month = 0;  // months since the patient's first scan
  int age_years = 0;
  std::string mesh_path;  // relative to the dataset root
  double mis_gt_mm = 0.0; // analytic 2 * (r0 + A(t))
};

struct PatientRecord {
  std::string patient_id;
  Sex sex = Sex::kMale;
  int age0_years = 0;
  PatientGeometry geometry;
  std::vector<ScanRecord> scans;
};

struct TrainingPair {
  std::string patient_id;
  int source_scan = 0;  // index into the patient's scan list
  int target_scan = 0;
  int delta_months = 0;
  ClinicalCondition condition;  // age at source, sex, delta
};

struct SplitAssignment {
  std::vector<std::string> train, val, test;
};

// Ring-grid tube mesh: n_rings rings of ring_size vertices each, ring-major
// vertex order, quad strips split into triangles, open ends. Meshes built on
// the same grid share one canonical face list, which is what gives the
// dataset its vertex correspondence. radius_fn maps arc length in
// [0, axis_length] to the local tube radius; arc_radius 0 means a straight
// axis, otherwise the centerline bends along a circular arc of that radius.
Mesh tube_mesh(const std::function<double(double)>& radius_fn, int32_t n_rings,
               int32_t ring_size, double axis_length_mm,
               double arc_radius_mm = 0.0);

// Radius profile for one patient at a given scan month.
double bulge_amplitude(const GrowthModel& model, const PatientRecord& patient,
                       int scan_month);
Mesh patient_mesh(const GrowthModel& model, const PatientRecord& patient,
                  int scan_month, int32_t n_rings, int32_t ring_size);

// On-disk dataset layout, all paths relative to a root directory:
//   meshes/*.obj, manifest.jsonl, pairs.jsonl, splits.json, meta.json
struct DatasetPaths {
  std::filesystem::path root;
  std::filesystem::path meshes_dir() const { return root / "meshes"; }
  std::filesystem::path manifest() const { return root / "manifest.jsonl"; }
  std::filesystem::path pairs() const { return root / "pairs.jsonl"; }
  std::filesystem::path splits() const { return root / "splits.json"; }
  std::filesystem::path meta() const { return root / "meta.json"; }
};

struct CohortSpec {
  uint64_t seed = 1;
  int n_patients = 60;
  int32_t n_rings = 30;
  int32_t ring_size = 16;
  GrowthModel growth;
};

// Samples patients, writes meshes and the manifest/pairs/splits/meta files.
// Deterministic per seed; returns the in-memory records.
std::vector<PatientRecord> generate_cohort(const CohortSpec& spec,
                                           const DatasetPaths& paths);

// All ordered intra-patient scan pairs with |delta| <= 49 months, both
// temporal directions.
std::vector<TrainingPair> make_pairs(const std::vector<PatientRecord>& records);

// Patient-level 7:1:2 split; every part nonempty, no patient straddles.
SplitAssignment split_cohort(const std::vector<PatientRecord>& records,
                             uint64_t seed);

// Reload of a generated dataset. Meshes load lazily through mesh().
class Dataset {
 public:
  static Dataset load(const std::filesystem::path& root);

  const std::vector<PatientRecord>& records() const { return records_; }
  const std::vector<TrainingPair>& pairs() const { return pairs_; }
  const SplitAssignment& splits() const { return splits_; }
  int32_t n_rings() const { return n_rings_; }
  int32_t ring_size() const { return ring_size_; }

  const PatientRecord& patient(const std::string& id) const;
  const Mesh& mesh(const std::string& relative_path) const;
  const GraphTopology& topology() const;

  // Pairs whose patient belongs to the named split (train/val/test).
  std::vector<TrainingPair> pairs_for_split(const std::string& split) const;

 private:
  std::filesystem::path root_;
  std::vector<PatientRecord> records_;
  std::vector<TrainingPair> pairs_;
  SplitAssignment splits_;
  int32_t n_rings_ = 0;
  int32_t ring_size_ = 0;
  mutable std::unordered_map<std::string, Mesh> mesh_cache_;
  mutable std::unique_ptr<GraphTopology> topology_;
};

}  // namespace meshgrow
