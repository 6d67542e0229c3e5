#include <fstream>

#include <nlohmann/json.hpp>

#include "meshgrow/trainer.hpp"

namespace meshgrow {

using nlohmann::json;

std::string to_string(ReconMode m) { return m == ReconMode::kL1 ? "l1" : "cd"; }

ReconMode recon_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return ReconMode::kL1;
  if (s == "cd" || s == "CD") return ReconMode::kCd;
  throw ContractError("config: recon must be l1|cd, got '" + s + "'");
}

std::string to_string(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  throw ContractError("config: precision must be f32|f64, got '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ContractError("config: epochs must be >= 0");
  if (batch_size != 1) {
    throw ContractError("config: only batch_size 1 is supported");
  }
  if (alpha <= 0.0) throw ContractError("config: alpha must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ContractError("config: betas must lie in [0, 1)");
  }
  if (lambda_rec < 0.0 || lambda_adv < 0.0) {
    throw ContractError("config: loss weights must be >= 0");
  }
  if (lambda_rec == 0.0 && !(adversarial && lambda_adv > 0.0)) {
    throw ContractError("config: at least one loss must be enabled");
  }
  if (k_neighbors < 1) throw ContractError("config: k_neighbors must be >= 1");
  if (checkpoint_every < 1 || eval_every < 1 || eval_max_pairs < 1) {
    throw ContractError("config: intervals must be >= 1");
  }
}

std::string TrainConfig::to_json_string() const {
  json j{{"epochs", epochs},
         {"batch_size", batch_size},
         {"seed", seed},
         {"alpha", alpha},
         {"beta1", beta1},
         {"beta2", beta2},
         {"eps", eps},
         {"lambda_rec", lambda_rec},
         {"lambda_adv", lambda_adv},
         {"recon", to_string(recon)},
         {"adversarial", adversarial},
         {"backbone", to_string(backbone)},
         {"use_condition", use_condition},
         {"precision", to_string(precision)},
         {"k_neighbors", k_neighbors},
         {"checkpoint_every", checkpoint_every},
         {"eval_every", eval_every},
         {"eval_max_pairs", eval_max_pairs}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<uint64_t>();
      else if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "beta1") cfg.beta1 = value.get<double>();
      else if (key == "beta2") cfg.beta2 = value.get<double>();
      else if (key == "eps") cfg.eps = value.get<double>();
      else if (key == "lambda_rec") cfg.lambda_rec = value.get<double>();
      else if (key == "lambda_adv") cfg.lambda_adv = value.get<double>();
      else if (key == "recon") cfg.recon = recon_from_string(value.get<std::string>());
      else if (key == "adversarial") cfg.adversarial = value.get<bool>();
      else if (key == "backbone") cfg.backbone = backbone_from_string(value.get<std::string>());
      else if (key == "use_condition") cfg.use_condition = value.get<bool>();
      else if (key == "precision") cfg.precision = precision_from_string(value.get<std::string>());
      else if (key == "k_neighbors") cfg.k_neighbors = value.get<int>();
      else if (key == "checkpoint_every") cfg.checkpoint_every = value.get<int>();
      else if (key == "eval_every") cfg.eval_every = value.get<int>();
      else if (key == "eval_max_pairs") cfg.eval_max_pairs = value.get<int>();
      else throw ContractError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: bad value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_string(text);
}

SampleSet samples_from_dataset(const Dataset& ds) {
  SampleSet set;
  set.topology = ds.topology();
  set.n_rings = ds.n_rings();
  set.ring_size = ds.ring_size();
  set.train = resolve_pairs(ds, ds.pairs_for_split("train"));
  set.val = resolve_pairs(ds, ds.pairs_for_split("val"));
  return set;
}

std::vector<TrainSample> resolve_pairs(const Dataset& ds,
                                       const std::vector<TrainingPair>& pairs) {
  std::vector<TrainSample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto& patient = ds.patient(p.patient_id);
    char id[64];
    std::snprintf(id, sizeof(id), "%s_s%02d->s%02d", p.patient_id.c_str(),
                  p.source_scan, p.target_scan);
    out.push_back(TrainSample{
        id, &ds.mesh(patient.scans.at(p.source_scan).mesh_path),
        &ds.mesh(patient.scans.at(p.target_scan).mesh_path), p.condition});
  }
  return out;
}

std::vector<EvalPair> eval_pairs_for_split(const Dataset& ds,
                                           const std::string& split) {
  std::vector<EvalPair> out;
  for (const auto& s : resolve_pairs(ds, ds.pairs_for_split(split))) {
    out.push_back(EvalPair{s.id, s.condition.delta_months, s.source, s.target,
                           s.condition});
  }
  return out;
}

}  // namespace meshgrow
