// meshgrow: synthetic longitudinal aneurysm meshes, conditional mesh-to-mesh
// GAN training, prediction, evaluation and the ablation sweep.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "meshgrow/errors.hpp"
#include "meshgrow/metrics.hpp"
#include "meshgrow/synth.hpp"
#include "meshgrow/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meshgrow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

GrowthModel growth_from_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  GrowthModel g;
  for (const auto& [key, value] : j.items()) {
    if (key == "base_radius_mm") g.base_radius_mm = value.get<double>();
    else if (key == "growth_rate_mm") g.growth_rate_mm = value.get<double>();
    else if (key == "gamma_age") g.gamma_age = value.get<double>();
    else if (key == "gamma_sex") g.gamma_sex = value.get<double>();
    else if (key == "amplitude_min_mm") g.amplitude_min_mm = value.get<double>();
    else if (key == "amplitude_max_mm") g.amplitude_max_mm = value.get<double>();
    else if (key == "sigma_min_mm") g.sigma_min_mm = value.get<double>();
    else if (key == "sigma_max_mm") g.sigma_max_mm = value.get<double>();
    else if (key == "axis_length_mm") g.axis_length_mm = value.get<double>();
    else throw ContractError("config: unknown key '" + key + "'");
  }
  return g;
}

struct GenDataArgs {
  std::string out;
  int patients = 60;
  uint64_t seed = 1;
  std::vector<int> grid = {30, 16};
  bool force = false;
  std::string config;
};

int run_gen_data(const GenDataArgs& args) {
  const fs::path out(args.out);
  if (fs::exists(out) && !fs::is_empty(out) && !args.force) {
    throw ContractError("gen-data: " + args.out +
                        " exists and is not empty (use --force)");
  }
  if (args.grid.size() != 2) {
    throw ContractError("gen-data: --grid expects n_rings,ring_size");
  }
  CohortSpec spec;
  spec.seed = args.seed;
  spec.n_patients = args.patients;
  spec.n_rings = args.grid[0];
  spec.ring_size = args.grid[1];
  if (!args.config.empty()) spec.growth = growth_from_config(args.config);
  fs::create_directories(out);
  const auto records = generate_cohort(spec, DatasetPaths{out});
  size_t scans = 0;
  for (const auto& r : records) scans += r.scans.size();
  std::printf("wrote %zu patients / %zu scans to %s\n", records.size(), scans,
              args.out.c_str());
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string resume;
  // flag overrides; negative/empty means "not given"
  int epochs = -1;
  int64_t seed = -1;
  std::string backbone, recon, precision;
  int adversarial = -1;
};

TrainConfig resolve_train_config(const TrainArgs& args) {
  TrainConfig cfg = args.config.empty()
                        ? TrainConfig{}
                        : TrainConfig::from_json_file(args.config);
  // flags win over the config file
  if (args.epochs >= 0) cfg.epochs = args.epochs;
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
  if (!args.backbone.empty()) cfg.backbone = backbone_from_string(args.backbone);
  if (!args.recon.empty()) cfg.recon = recon_from_string(args.recon);
  if (!args.precision.empty()) {
    cfg.precision = precision_from_string(args.precision);
  }
  if (args.adversarial >= 0) cfg.adversarial = args.adversarial != 0;
  cfg.validate();
  return cfg;
}

template <typename T>
int train_with(const Dataset& ds, const TrainConfig& cfg,
               const TrainArgs& args) {
  const SampleSet samples = samples_from_dataset(ds);
  Trainer<T> trainer(samples, cfg);
  if (!args.resume.empty()) trainer.load_checkpoint(args.resume);
  const fs::path out(args.out);
  fs::create_directories(out);
  {
    std::ofstream echo(out / "config.json");
    echo << cfg.to_json_string() << "\n";
  }
  trainer.train(out);
  if (!trainer.log().empty()) {
    const auto& last = trainer.log().back();
    std::printf("epoch %d %s: l1=%.4f cd=%.4f hd=%.4f mis_err=%.4f\n",
                last.epoch, last.split.c_str(), last.l1, last.cd, last.hd,
                last.mis_err);
  }
  return kExitOk;
}

int run_train(const TrainArgs& args) {
  const TrainConfig cfg = resolve_train_config(args);
  const Dataset ds = Dataset::load(args.data);
  if (cfg.precision == Precision::kF32) {
    return train_with<float>(ds, cfg, args);
  }
  return train_with<double>(ds, cfg, args);
}

struct PredictArgs {
  std::string checkpoint;
  std::string mesh;
  int age = 0;
  std::string sex;
  std::vector<int> deltas;
  std::string out;
};

fs::path delta_suffixed(const fs::path& base, int delta) {
  fs::path p = base;
  const std::string stem = p.stem().string();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_d%+d", delta);
  p.replace_filename(stem + buf + p.extension().string());
  return p;
}

template <typename T>
int predict_with(const PredictArgs& args) {
  auto loaded = load_generator<T>(args.checkpoint);
  const Mesh source = load_mesh(args.mesh);
  if (source.vertex_count() != loaded.n_rings * loaded.ring_size) {
    throw ContractError("predict: mesh has " +
                        std::to_string(source.vertex_count()) +
                        " vertices but the checkpoint grid is " +
                        std::to_string(loaded.n_rings) + "x" +
                        std::to_string(loaded.ring_size));
  }
  const auto topo = GraphTopology::from_mesh(source);
  const Sex sex = sex_from_string(args.sex);
  for (int delta : args.deltas) {
    const ClinicalCondition cond(args.age, sex, delta);
    const Mesh predicted =
        predict_mesh(source, topo, encode_condition(cond), loaded.params);
    const fs::path out_path = args.deltas.size() == 1
                                  ? fs::path(args.out)
                                  : delta_suffixed(args.out, delta);
    if (out_path.has_parent_path()) {
      fs::create_directories(out_path.parent_path());
    }
    save_mesh(predicted, out_path);
    const double mis =
        mis_diameter(predicted, loaded.n_rings, loaded.ring_size);
    std::printf("delta=%+d mis_pred_mm=%.3f mesh=%s\n", delta, mis,
                out_path.string().c_str());
  }
  return kExitOk;
}

int run_predict(const PredictArgs& args) {
  if (args.deltas.empty()) {
    throw ContractError("predict: at least one --delta required");
  }
  const TrainConfig cfg = peek_checkpoint_config(args.checkpoint);
  if (cfg.precision == Precision::kF32) return predict_with<float>(args);
  return predict_with<double>(args);
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
};

template <typename T>
int evaluate_with(const EvaluateArgs& args) {
  auto loaded = load_generator<T>(args.checkpoint);
  const Dataset ds = Dataset::load(args.data);
  if (ds.n_rings() != loaded.n_rings || ds.ring_size() != loaded.ring_size) {
    throw ContractError("evaluate: dataset grid does not match checkpoint");
  }
  const auto pairs = eval_pairs_for_split(ds, args.split);
  const auto& topo = ds.topology();
  auto& params = loaded.params;
  const auto report = evaluate(
      pairs,
      [&](const EvalPair& p) {
        return predict_mesh(*p.source, topo, encode_condition(*p.condition),
                            params);
      },
      ds.n_rings(), ds.ring_size());
  const fs::path out(args.out);
  fs::create_directories(out);
  report.write_csv(out / "report.csv");
  report.write_summary_json(out / "summary.json");
  std::printf("%s split, %zu pairs\n", args.split.c_str(),
              report.samples.size());
  std::printf("mae:     %.4f +- %.4f mm\n", report.mae.mean, report.mae.std_dev);
  std::printf("cd:      %.4f +- %.4f mm\n", report.cd.mean, report.cd.std_dev);
  std::printf("hd:      %.4f +- %.4f mm\n", report.hd.mean, report.hd.std_dev);
  std::printf("mis_err: %.4f +- %.4f mm\n", report.mis_err.mean,
              report.mis_err.std_dev);
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& args) {
  const TrainConfig cfg = peek_checkpoint_config(args.checkpoint);
  if (cfg.precision == Precision::kF32) return evaluate_with<float>(args);
  return evaluate_with<double>(args);
}

struct AblateArgs {
  std::string data;
  std::string out;
  int epochs = 30;
  uint64_t seed = 1;
};

struct AblationCell {
  Backbone backbone;
  ReconMode recon;
  bool adversarial;

  std::string name() const {
    const std::string b = backbone == Backbone::kKcnGcn
                              ? "kcngcn"
                              : (backbone == Backbone::kKcn ? "kcn" : "gcn");
    return b + "_" + to_string(recon) + (adversarial ? "_adv" : "_noadv");
  }
};

int run_ablate(const AblateArgs& args) {
  const Dataset ds = Dataset::load(args.data);
  const SampleSet samples = samples_from_dataset(ds);
  const auto test_pairs = eval_pairs_for_split(ds, "test");
  const fs::path out(args.out);
  fs::create_directories(out);

  std::vector<AblationCell> grid;
  for (Backbone bb : {Backbone::kKcnGcn, Backbone::kKcn, Backbone::kGcn}) {
    for (ReconMode rm : {ReconMode::kL1, ReconMode::kCd}) {
      for (bool adv : {true, false}) grid.push_back({bb, rm, adv});
    }
  }

  for (const auto& cell : grid) {
    const fs::path cell_dir = out / cell.name();
    if (fs::exists(cell_dir / "summary.json")) {
      std::printf("[%s] already complete, skipping\n", cell.name().c_str());
      continue;
    }
    std::printf("[%s] training %d epochs\n", cell.name().c_str(), args.epochs);
    std::fflush(stdout);
    TrainConfig cfg;
    cfg.epochs = args.epochs;
    cfg.seed = args.seed;
    cfg.backbone = cell.backbone;
    cfg.recon = cell.recon;
    cfg.adversarial = cell.adversarial;
    cfg.eval_every = std::max(1, args.epochs / 4);
    Trainer<float> trainer(samples, cfg);
    trainer.train(cell_dir);

    auto& params = trainer.generator();
    const auto& topo = ds.topology();
    const auto report = evaluate(
        test_pairs,
        [&](const EvalPair& p) {
          return predict_mesh(*p.source, topo, encode_condition(*p.condition),
                              params);
        },
        ds.n_rings(), ds.ring_size());
    report.write_csv(cell_dir / "report.csv");
    report.write_summary_json(cell_dir / "summary.json");
  }

  // Combined table assembled from the per-cell summaries, so interrupted
  // sweeps compose after a resume.
  std::ofstream table(out / "ablation.csv");
  table << "cell,backbone,recon,adversarial,mae_mean,mae_std,cd_mean,cd_std,"
           "hd_mean,hd_std,mis_err_mean,mis_err_std\n";
  std::printf("%-18s %-14s %-14s %-14s %-8s\n", "cell", "mae", "cd", "hd",
              "mis_err");
  for (const auto& cell : grid) {
    std::ifstream in(out / cell.name() / "summary.json");
    if (!in) throw IoError("ablate: missing summary for " + cell.name());
    const json j = json::parse(in);
    char row[256];
    std::snprintf(
        row, sizeof(row),
        "%s,%s,%s,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
        cell.name().c_str(), to_string(cell.backbone).c_str(),
        to_string(cell.recon).c_str(), cell.adversarial ? 1 : 0,
        j["mae"]["mean"].get<double>(), j["mae"]["std"].get<double>(),
        j["cd"]["mean"].get<double>(), j["cd"]["std"].get<double>(),
        j["hd"]["mean"].get<double>(), j["hd"]["std"].get<double>(),
        j["mis_err"]["mean"].get<double>(), j["mis_err"]["std"].get<double>());
    table << row;
    std::printf("%-18s %6.3f+-%-6.3f %6.3f+-%-6.3f %6.3f+-%-6.3f %6.3f\n",
                cell.name().c_str(), j["mae"]["mean"].get<double>(),
                j["mae"]["std"].get<double>(), j["cd"]["mean"].get<double>(),
                j["cd"]["std"].get<double>(), j["hd"]["mean"].get<double>(),
                j["hd"]["std"].get<double>(),
                j["mis_err"]["mean"].get<double>());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional mesh-to-mesh aneurysm growth model"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data",
                                 "generate a synthetic longitudinal cohort");
  gen->add_option("--out", gen_args.out, "dataset directory")->required();
  gen->add_option("--patients", gen_args.patients, "number of patients");
  gen->add_option("--seed", gen_args.seed, "cohort seed");
  gen->add_option("--grid", gen_args.grid, "n_rings,ring_size")
      ->delimiter(',')
      ->expected(2);
  gen->add_flag("--force", gen_args.force, "overwrite a non-empty directory");
  gen->add_option("--config", gen_args.config, "growth-model JSON overrides");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the generator");
  train->add_option("--data", train_args.data, "dataset directory")->required();
  train->add_option("--out", train_args.out, "run directory")->required();
  train->add_option("--config", train_args.config, "training config JSON");
  train->add_option("--resume", train_args.resume, "checkpoint to resume from");
  train->add_option("--epochs", train_args.epochs, "override epochs");
  train->add_option("--seed", train_args.seed, "override seed");
  train->add_option("--backbone", train_args.backbone, "kcn|gcn|kcn+gcn");
  train->add_option("--recon", train_args.recon, "l1|cd");
  train->add_option("--precision", train_args.precision, "f32|f64");
  train->add_flag("--adv,!--no-adv", train_args.adversarial,
                  "toggle the adversarial loss");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "predict a follow-up mesh");
  predict->add_option("--checkpoint", predict_args.checkpoint)->required();
  predict->add_option("--mesh", predict_args.mesh, "source OBJ")->required();
  predict->add_option("--age", predict_args.age, "age at the source scan")
      ->required();
  predict->add_option("--sex", predict_args.sex, "male|female")->required();
  predict
      ->add_option("--delta", predict_args.deltas,
                   "signed time interval(s), months")
      ->required();
  predict->add_option("--out", predict_args.out, "output OBJ path")->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "metrics over a split");
  evaluate->add_option("--checkpoint", eval_args.checkpoint)->required();
  evaluate->add_option("--data", eval_args.data)->required();
  evaluate->add_option("--split", eval_args.split, "train|val|test");
  evaluate->add_option("--out", eval_args.out, "report directory")->required();

  AblateArgs ablate_args;
  auto* ablate =
      app.add_subcommand("ablate", "backbone x loss x adversarial sweep");
  ablate->add_option("--data", ablate_args.data)->required();
  ablate->add_option("--out", ablate_args.out)->required();
  ablate->add_option("--epochs", ablate_args.epochs, "epochs per cell");
  ablate->add_option("--seed", ablate_args.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (predict->parsed()) return run_predict(predict_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    if (ablate->parsed()) return run_ablate(ablate_args);
  } catch (const NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
