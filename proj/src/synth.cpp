#include "meshgrow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "meshgrow/errors.hpp"
#include "meshgrow/rng.hpp"

namespace meshgrow {

using nlohmann::json;

Mesh tube_mesh(const std::function<double(double)>& radius_fn, int32_t n_rings,
               int32_t ring_size, double axis_length_mm,
               double arc_radius_mm) {
  if (n_rings < 2 || ring_size < 3) {
    throw ContractError("tube_mesh: grid must be at least 2 rings of 3");
  }
  if (axis_length_mm <= 0.0) {
    throw ContractError("tube_mesh: axis length must be positive");
  }
  Mesh mesh;
  mesh.vertices.reserve(static_cast<size_t>(n_rings) * ring_size);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int32_t i = 0; i < n_rings; ++i) {
    const double s = axis_length_mm * i / (n_rings - 1);
    const double r = radius_fn(s);
    if (!(r > 0.0)) {
      throw ContractError("tube_mesh: radius profile must stay positive");
    }
    Vec3 center, normal, binormal;
    if (arc_radius_mm > 0.0) {
      const double phi = s / arc_radius_mm;
      center = {arc_radius_mm * std::sin(phi), 0.0,
                arc_radius_mm * (1.0 - std::cos(phi))};
      normal = {-std::sin(phi), 0.0, std::cos(phi)};
      binormal = {0.0, -1.0, 0.0};
    } else {
      center = {0.0, 0.0, s};
      normal = {1.0, 0.0, 0.0};
      binormal = {0.0, 1.0, 0.0};
    }
    for (int32_t j = 0; j < ring_size; ++j) {
      const double theta = two_pi * j / ring_size;
      const double cn = r * std::cos(theta), cb = r * std::sin(theta);
      mesh.vertices.push_back({center[0] + cn * normal[0] + cb * binormal[0],
                               center[1] + cn * normal[1] + cb * binormal[1],
                               center[2] + cn * normal[2] + cb * binormal[2]});
    }
  }
  // Canonical face list: depends only on (n_rings, ring_size), so all meshes
  // on one grid are vertex-corresponded by construction.
  mesh.faces.reserve(static_cast<size_t>(n_rings - 1) * ring_size * 2);
  for (int32_t i = 0; i + 1 < n_rings; ++i) {
    for (int32_t j = 0; j < ring_size; ++j) {
      const int32_t a = i * ring_size + j;
      const int32_t b = i * ring_size + (j + 1) % ring_size;
      const int32_t c = (i + 1) * ring_size + j;
      const int32_t d = (i + 1) * ring_size + (j + 1) % ring_size;
      mesh.faces.push_back({a, b, d});
      mesh.faces.push_back({a, d, c});
    }
  }
  mesh.validate();
  return mesh;
}

double bulge_amplitude(const GrowthModel& model, const PatientRecord& patient,
                       int scan_month) {
  return patient.geometry.amplitude0_mm +
         model.rate_for(patient.age0_years, patient.sex) * scan_month;
}

Mesh patient_mesh(const GrowthModel& model, const PatientRecord& patient,
                  int scan_month, int32_t n_rings, int32_t ring_size) {
  const double amplitude = bulge_amplitude(model, patient, scan_month);
  const auto& geo = patient.geometry;
  auto radius = [&](double s) {
    const double d = s - geo.bulge_center_mm;
    return model.base_radius_mm +
           amplitude * std::exp(-d * d / (2.0 * geo.sigma_mm * geo.sigma_mm));
  };
  return tube_mesh(radius, n_rings, ring_size, model.axis_length_mm,
                   geo.arc_radius_mm);
}

namespace {

std::string scan_mesh_path(const std::string& patient_id, int scan_index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "meshes/%s_s%02d.obj", patient_id.c_str(),
                scan_index);
  return buf;
}

json manifest_line(const PatientRecord& p, const ScanRecord& s) {
  return json{{"patient_id", p.patient_id}, {"sex", to_string(p.sex)},
              {"scan_month", s.scan_month}, {"age_years", s.age_years},
              {"mesh_path", s.mesh_path},   {"mis_gt_mm", s.mis_gt_mm}};
}

}  // namespace

std::vector<PatientRecord> generate_cohort(const CohortSpec& spec,
                                           const DatasetPaths& paths) {
  if (spec.n_patients < 1) {
    throw ContractError("generate_cohort: need at least one patient");
  }
  if (spec.n_rings < 4 || spec.ring_size < 8) {
    throw ContractError("generate_cohort: grid must be at least 4 rings of 8");
  }
  Rng rng(spec.seed);
  const auto& growth = spec.growth;
  std::filesystem::create_directories(paths.meshes_dir());

  std::vector<PatientRecord> records;
  records.reserve(spec.n_patients);
  for (int pi = 0; pi < spec.n_patients; ++pi) {
    PatientRecord p;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "p%03d", pi);
    p.patient_id = idbuf;
    p.sex = rng.bernoulli(0.5) ? Sex::kMale : Sex::kFemale;

    const int n_scans = static_cast<int>(rng.uniform_int(2, 8));
    std::vector<int> months{0};
    for (int s = 1; s < n_scans; ++s) {
      months.push_back(months.back() +
                       static_cast<int>(rng.uniform_int(3, 24)));
    }

    p.geometry.amplitude0_mm =
        rng.uniform(growth.amplitude_min_mm, growth.amplitude_max_mm);
    p.geometry.sigma_mm = rng.uniform(growth.sigma_min_mm, growth.sigma_max_mm);
    // Snap the bulge center onto a ring so the analytic peak is sampled.
    const int32_t lo = spec.n_rings / 3;
    const int32_t hi = 2 * spec.n_rings / 3;
    const auto ring = static_cast<int32_t>(rng.uniform_int(lo, hi));
    p.geometry.bulge_center_mm =
        growth.axis_length_mm * ring / (spec.n_rings - 1);
    p.geometry.arc_radius_mm =
        rng.bernoulli(0.5) ? rng.uniform(120.0, 200.0) : 0.0;

    // Keep the age at every scan inside the codec's [0, 99] domain; the
    // total span is at most 168 months, so the cap never drops below 85.
    const int age_cap = std::min(93, 99 - months.back() / 12);
    p.age0_years = static_cast<int>(rng.uniform_int(35, age_cap));

    for (int s = 0; s < n_scans; ++s) {
      ScanRecord scan;
      scan.scan_month = months[s];
      scan.age_years = p.age0_years + months[s] / 12;
      scan.mesh_path = scan_mesh_path(p.patient_id, s);
      scan.mis_gt_mm =
          2.0 * (growth.base_radius_mm + bulge_amplitude(growth, p, months[s]));
      const Mesh mesh =
          patient_mesh(growth, p, months[s], spec.n_rings, spec.ring_size);
      save_mesh(mesh, paths.root / scan.mesh_path);
      p.scans.push_back(std::move(scan));
    }
    records.push_back(std::move(p));
  }

  {
    std::ofstream out(paths.manifest());
    if (!out) throw IoError("cannot write " + paths.manifest().string());
    for (const auto& p : records) {
      for (const auto& s : p.scans) out << manifest_line(p, s).dump() << "\n";
    }
  }
  {
    std::ofstream out(paths.pairs());
    if (!out) throw IoError("cannot write " + paths.pairs().string());
    for (const auto& pair : make_pairs(records)) {
      out << json{{"patient_id", pair.patient_id},
                  {"source_scan", pair.source_scan},
                  {"target_scan", pair.target_scan},
                  {"delta_months", pair.delta_months}}
                 .dump()
          << "\n";
    }
  }
  {
    const SplitAssignment splits = split_cohort(records, spec.seed);
    json j{{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
    std::ofstream out(paths.splits());
    if (!out) throw IoError("cannot write " + paths.splits().string());
    out << j.dump(2) << "\n";
  }
  {
    json j{{"format", 1},
           {"seed", spec.seed},
           {"n_patients", spec.n_patients},
           {"n_rings", spec.n_rings},
           {"ring_size", spec.ring_size},
           {"growth",
            {{"base_radius_mm", growth.base_radius_mm},
             {"growth_rate_mm", growth.growth_rate_mm},
             {"gamma_age", growth.gamma_age},
             {"gamma_sex", growth.gamma_sex},
             {"amplitude_min_mm", growth.amplitude_min_mm},
             {"amplitude_max_mm", growth.amplitude_max_mm},
             {"sigma_min_mm", growth.sigma_min_mm},
             {"sigma_max_mm", growth.sigma_max_mm},
             {"axis_length_mm", growth.axis_length_mm}}}};
    std::ofstream out(paths.meta());
    if (!out) throw IoError("cannot write " + paths.meta().string());
    out << j.dump(2) << "\n";
  }
  return records;
}

std::vector<TrainingPair> make_pairs(
    const std::vector<PatientRecord>& records) {
  std::vector<TrainingPair> pairs;
  for (const auto& p : records) {
    const int n = static_cast<int>(p.scans.size());
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        const int delta = p.scans[b].scan_month - p.scans[a].scan_month;
        if (std::abs(delta) > kMaxAbsDelta) continue;
        pairs.push_back(TrainingPair{
            p.patient_id, a, b, delta,
            ClinicalCondition(p.scans[a].age_years, p.sex, delta)});
      }
    }
  }
  return pairs;
}

SplitAssignment split_cohort(const std::vector<PatientRecord>& records,
                             uint64_t seed) {
  const int n = static_cast<int>(records.size());
  if (n < 3) {
    throw ContractError("split_cohort: need at least 3 patients for 7:1:2");
  }
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.patient_id);
  Rng rng(seed ^ 0x5eed5011d5ULL);
  rng.shuffle(ids.begin(), ids.end());

  int n_val = std::max(1, static_cast<int>(std::lround(0.1 * n)));
  int n_test = std::max(1, static_cast<int>(std::lround(0.2 * n)));
  while (n - n_val - n_test < 1) {
    if (n_test > 1) --n_test; else --n_val;
  }
  SplitAssignment s;
  s.train.assign(ids.begin(), ids.end() - n_val - n_test);
  s.val.assign(ids.end() - n_val - n_test, ids.end() - n_test);
  s.test.assign(ids.end() - n_test, ids.end());
  return s;
}

const PatientRecord& Dataset::patient(const std::string& id) const {
  for (const auto& r : records_) {
    if (r.patient_id == id) return r;
  }
  throw ContractError("dataset: unknown patient " + id);
}

const Mesh& Dataset::mesh(const std::string& relative_path) const {
  auto it = mesh_cache_.find(relative_path);
  if (it == mesh_cache_.end()) {
    it = mesh_cache_.emplace(relative_path, load_mesh(root_ / relative_path))
             .first;
  }
  return it->second;
}

const GraphTopology& Dataset::topology() const {
  if (!topology_) {
    if (records_.empty() || records_[0].scans.empty()) {
      throw ContractError("dataset: no scans");
    }
    topology_ = std::make_unique<GraphTopology>(
        GraphTopology::from_mesh(mesh(records_[0].scans[0].mesh_path)));
  }
  return *topology_;
}

std::vector<TrainingPair> Dataset::pairs_for_split(
    const std::string& split) const {
  const std::vector<std::string>* ids = nullptr;
  if (split == "train") ids = &splits_.train;
  else if (split == "val") ids = &splits_.val;
  else if (split == "test") ids = &splits_.test;
  else throw ContractError("dataset: unknown split '" + split + "'");
  std::vector<TrainingPair> out;
  for (const auto& p : pairs_) {
    if (std::find(ids->begin(), ids->end(), p.patient_id) != ids->end()) {
      out.push_back(p);
    }
  }
  return out;
}

Dataset Dataset::load(const std::filesystem::path& root) {
  Dataset ds;
  ds.root_ = root;
  const DatasetPaths paths{root};

  std::ifstream meta_in(paths.meta());
  if (!meta_in) throw IoError("dataset: cannot open " + paths.meta().string());
  const json meta = json::parse(meta_in);
  ds.n_rings_ = meta.at("n_rings").get<int32_t>();
  ds.ring_size_ = meta.at("ring_size").get<int32_t>();

  std::ifstream man_in(paths.manifest());
  if (!man_in) {
    throw IoError("dataset: cannot open " + paths.manifest().string());
  }
  std::string line;
  while (std::getline(man_in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string pid = j.at("patient_id").get<std::string>();
    if (ds.records_.empty() || ds.records_.back().patient_id != pid) {
      PatientRecord p;
      p.patient_id = pid;
      p.sex = sex_from_string(j.at("sex").get<std::string>());
      ds.records_.push_back(std::move(p));
    }
    ScanRecord s;
    s.scan_month = j.at("scan_month").get<int>();
    s.age_years = j.at("age_years").get<int>();
    s.mesh_path = j.at("mesh_path").get<std::string>();
    s.mis_gt_mm = j.at("mis_gt_mm").get<double>();
    auto& p = ds.records_.back();
    if (p.scans.empty()) p.age0_years = s.age_years;
    p.scans.push_back(std::move(s));
  }

  std::ifstream pairs_in(paths.pairs());
  if (!pairs_in) {
    throw IoError("dataset: cannot open " + paths.pairs().string());
  }
  while (std::getline(pairs_in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string pid = j.at("patient_id").get<std::string>();
    const auto& p = ds.patient(pid);
    const int src = j.at("source_scan").get<int>();
    const int tgt = j.at("target_scan").get<int>();
    const int delta = j.at("delta_months").get<int>();
    ds.pairs_.push_back(TrainingPair{
        pid, src, tgt, delta,
        ClinicalCondition(p.scans.at(src).age_years, p.sex, delta)});
  }

  std::ifstream splits_in(paths.splits());
  if (!splits_in) {
    throw IoError("dataset: cannot open " + paths.splits().string());
  }
  const json sj = json::parse(splits_in);
  ds.splits_.train = sj.at("train").get<std::vector<std::string>>();
  ds.splits_.val = sj.at("val").get<std::vector<std::string>>();
  ds.splits_.test = sj.at("test").get<std::vector<std::string>>();
  return ds;
}

}  // namespace meshgrow
