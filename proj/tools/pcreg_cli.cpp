// pcreg: command-line front end for the registration toolkit.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcreg/checkpoint.hpp"
#include "pcreg/cloud_ops.hpp"
#include "pcreg/config.hpp"
#include "pcreg/diagnostics.hpp"
#include "pcreg/errors.hpp"
#include "pcreg/evaluation.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/io.hpp"
#include "pcreg/registration.hpp"
#include "pcreg/synth.hpp"
#include "pcreg/training.hpp"

namespace fs = std::filesystem;
using namespace pcreg;

namespace {

ShapeParams parse_shape_params(const std::vector<std::string>& items) {
  ShapeParams p;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--param expects key=value, got '" + item + "'");
    p[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return p;
}

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

void print_warnings(const std::vector<std::string>& warnings, const std::string& path) {
  for (const auto& w : warnings) std::cerr << "warning: " << path << ": " << w << '\n';
}

PointCloud load_cloud_verbose(const std::string& path) {
  std::vector<std::string> warnings;
  PointCloud c = load_cloud(path, &warnings);
  print_warnings(warnings, path);
  return c;
}

// Dataset description shared by gen-data, train and bench.
DatasetSpec dataset_from(const RunConfig& cfg) {
  DatasetSpec spec;
  cfg.apply(spec);
  spec.templates = cfg.load_templates();
  return spec;
}

std::vector<BenchmarkPair> to_benchmark(const DatasetSpec& spec, const std::vector<TrainingPair>& pairs) {
  std::vector<BenchmarkPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.push_back({i, pairs[i].source, spec.templates[pairs[i].template_index], pairs[i].target()});
  }
  return out;
}

std::string pair_file(std::size_t i, const char* prefix, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu%s", prefix, i, ext);
  return buf;
}

void write_benchmark_outputs(const std::vector<EvalRecord>& records, const std::string& records_csv,
                             const std::string& summary_csv) {
  const auto rows = summarize(records);
  if (!records_csv.empty()) {
    std::ofstream os(records_csv);
    if (!os) throw std::runtime_error("cannot write " + records_csv);
    write_records_csv(os, records);
  }
  if (!summary_csv.empty()) {
    std::ofstream os(summary_csv);
    if (!os) throw std::runtime_error("cannot write " + summary_csv);
    write_summary_csv(os, rows);
  }
  std::cout << format_summary_table(rows);
}

// Learned methods run on a double copy of the weights unless
// inference_precision = float; the default epsilon of 1e-7 is below float
// resolution for the cumulative transform.
struct LoadedModel {
  std::optional<Model<float>> f32;
  std::optional<Model<double>> f64;
};

LoadedModel load_model(const std::string& path, const RunConfig& cfg) {
  LoadedModel m;
  if (path.empty()) return m;
  m.f32 = load_checkpoint<float>(path);
  const std::string precision = cfg.get_string("inference_precision", "double");
  if (precision == "double") {
    m.f64 = m.f32->cast<double>();
  } else if (precision != "float") {
    throw std::invalid_argument("inference_precision must be float or double, got '" + precision + "'");
  }
  return m;
}

std::vector<Method> methods_from(const std::vector<std::string>& names, const LoadedModel& model,
                                 const RunConfig& cfg) {
  RegistrationConfig reg;
  cfg.apply(reg);
  IcpConfig icp_cfg;
  cfg.apply(icp_cfg);
  std::vector<Method> methods;
  for (const auto& n : names) {
    if (model.f64) {
      methods.push_back(make_method(n, &*model.f64, reg, icp_cfg));
    } else {
      methods.push_back(make_method(n, model.f32 ? &*model.f32 : nullptr, reg, icp_cfg));
    }
  }
  return methods;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correspondence-free point cloud registration (PointNet + PCRNet / i-PCRNet / PointNetLK, ICP)"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Sample a synthetic shape");
  std::string synth_shape_name = "l-bracket", synth_out;
  std::size_t synth_points = 1024;
  std::uint64_t synth_seed = 1;
  std::vector<std::string> synth_params;
  bool synth_normalize = false;
  synth->add_option("--shape", synth_shape_name, "box | cylinder | plane-with-handle | l-bracket");
  synth->add_option("--points,-n", synth_points, "Number of surface samples")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--param", synth_params, "Shape dimension key=value (repeatable)");
  synth->add_flag("--normalize", synth_normalize, "Scale into the unit box and centre");
  synth->add_option("--out,-o", synth_out, "Output .xyz or .ply")->required();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a directory of test pairs");
  std::string gen_config, gen_out;
  std::size_t gen_pairs = 100;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config,-c", gen_config, "Run configuration file");
  gen->add_option("--pairs", gen_pairs, "Number of pairs")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Pair seed (overrides test_seed)");
  gen->add_option("--out,-o", gen_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train an FC-head model");
  std::string train_config, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  tr->add_option("--config,-c", train_config, "Run configuration file");
  tr->add_option("--out,-o", train_out, "Output directory (losses.csv, checkpoints)")->required();
  tr->add_option("--seed", train_seed, "Overrides train_seed and data_seed");
  tr->add_option("--epochs", train_epochs, "Overrides epochs");

  // register
  auto* reg = app.add_subcommand("register", "Register a source cloud to a template");
  std::string reg_method = "icp", reg_source, reg_template, reg_model, reg_config, reg_out;
  bool reg_trace = false;
  reg->add_option("--method,-m", reg_method, "icp | pcrnet | ipcrnet | lk");
  reg->add_option("--source,-s", reg_source, "Source cloud (.xyz/.ply)")->required();
  reg->add_option("--template,-t", reg_template, "Template cloud (.xyz/.ply)")->required();
  reg->add_option("--model", reg_model, "Checkpoint for learned methods");
  reg->add_option("--config,-c", reg_config, "Run configuration file");
  reg->add_option("--out,-o", reg_out, "Also write the 4x4 matrix here");
  reg->add_flag("--trace", reg_trace, "Print per-iteration residuals to stderr");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate methods on a gen-data directory");
  std::string eval_data, eval_model, eval_config, eval_records, eval_summary;
  std::vector<std::string> eval_methods{"icp"};
  ev->add_option("--data,-d", eval_data, "Directory written by gen-data")->required();
  ev->add_option("--method,-m", eval_methods, "Methods to run")->delimiter(',');
  ev->add_option("--model", eval_model, "Checkpoint for learned methods");
  ev->add_option("--config,-c", eval_config, "Run configuration file");
  ev->add_option("--records", eval_records, "Per-pair CSV output");
  ev->add_option("--summary", eval_summary, "Summary CSV output");

  // bench
  auto* bench = app.add_subcommand("bench", "Generate test pairs and compare methods");
  std::string bench_config, bench_out;
  std::optional<std::uint64_t> bench_seed;
  bench->add_option("--config,-c", bench_config, "Run configuration file")->required();
  bench->add_option("--out,-o", bench_out, "Output directory (overrides output_dir)");
  bench->add_option("--seed", bench_seed, "Overrides test_seed");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Compare reverse-mode gradients with finite differences");
  std::string gc_scope = "full";
  double gc_tol = 1e-3;
  std::uint64_t gc_seed = 1;
  int gc_points = 16;
  gc->add_option("--scope", gc_scope, "linear | encoder | full");
  gc->add_option("--tol", gc_tol, "Relative tolerance");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--points", gc_points, "Points per cloud")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      PointCloud c = synth_shape(parse_shape_kind(synth_shape_name), parse_shape_params(synth_params), synth_points,
                                 synth_seed);
      if (synth_normalize) c = normalize_unit_box(c);
      save_cloud(synth_out, c);
      return 0;
    }

    if (gen->parsed()) {
      RunConfig cfg = load_config(gen_config);
      const DatasetSpec spec = dataset_from(cfg);
      const auto seed = gen_seed.value_or(static_cast<std::uint64_t>(cfg.get_long("test_seed", 1000003)));
      const auto pairs = generate_pairs(spec, gen_pairs, seed);
      fs::create_directories(gen_out);
      for (std::size_t j = 0; j < spec.templates.size(); ++j) {
        save_cloud((fs::path(gen_out) / pair_file(j, "template", ".xyz")).string(), spec.templates[j]);
      }
      std::ofstream index(fs::path(gen_out) / "pairs.csv");
      index << "pair_id,source,template,target\n";
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string src = pair_file(i, "source", ".xyz"), tgt = pair_file(i, "target", ".txt");
        save_cloud((fs::path(gen_out) / src).string(), pairs[i].source);
        save_transform((fs::path(gen_out) / tgt).string(), pairs[i].target());
        index << i << ',' << src << ',' << pair_file(pairs[i].template_index, "template", ".xyz") << ',' << tgt << '\n';
      }
      std::cout << "wrote " << pairs.size() << " pairs to " << gen_out << '\n';
      return 0;
    }

    if (tr->parsed()) {
      RunConfig cfg = load_config(train_config);
      if (train_seed) {
        cfg.set("train_seed", std::to_string(*train_seed));
        cfg.set("data_seed", std::to_string(*train_seed));
      }
      if (train_epochs) cfg.set("epochs", std::to_string(*train_epochs));
      const DatasetSpec spec = dataset_from(cfg);
      TrainConfig tc;
      cfg.apply(tc);
      Model<float> model;
      TrainOutputs outputs;
      outputs.directory = train_out;
      outputs.on_epoch = [](const EpochStat& s) {
        std::cout << "epoch " << s.epoch << "  step " << s.step << "  loss " << s.loss << "  lr " << s.lr;
        if (s.failed_pairs) std::cout << "  failed pairs " << s.failed_pairs;
        std::cout << std::endl;
      };
      const TrainReport report = train(spec, tc, model, outputs);
      if (report.skipped_steps) std::cerr << "warning: " << report.skipped_steps << " steps skipped (non-finite gradients)\n";
      std::cout << "trained " << report.steps << " steps in " << report.wall_time_s << " s; checkpoint "
                << (fs::path(train_out) / "model.ckpt").string() << '\n';
      return 0;
    }

    if (reg->parsed()) {
      const RunConfig cfg = load_config(reg_config);
      const PointCloud source = load_cloud_verbose(reg_source);
      const PointCloud templ = load_cloud_verbose(reg_template);
      const LoadedModel model = load_model(reg_model, cfg);
      const Method m = methods_from({reg_method}, model, cfg).front();
      const RegistrationResult res = m.run(source, templ);
      if (reg_trace) {
        for (std::size_t i = 0; i < res.trace.size(); ++i) {
          std::cerr << "iteration " << i + 1 << "  residual " << res.trace[i].residual << '\n';
        }
        std::cerr << (res.converged ? "converged" : "stopped") << " after " << res.iterations_used << " iterations\n";
      }
      std::cout << format_matrix(res.transform);
      if (!reg_out.empty()) save_transform(reg_out, res.transform);
      return 0;
    }

    if (ev->parsed()) {
      const RunConfig cfg = load_config(eval_config);
      std::ifstream index(fs::path(eval_data) / "pairs.csv");
      if (!index) throw std::runtime_error("no pairs.csv in " + eval_data);
      std::string line;
      std::getline(index, line);
      std::vector<BenchmarkPair> pairs;
      std::map<std::string, PointCloud> templates;
      while (std::getline(index, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, src, tmpl, tgt;
        std::getline(ss, id, ',');
        std::getline(ss, src, ',');
        std::getline(ss, tmpl, ',');
        std::getline(ss, tgt, ',');
        if (!templates.count(tmpl)) templates.emplace(tmpl, load_cloud((fs::path(eval_data) / tmpl).string()));
        pairs.push_back({static_cast<std::size_t>(std::stoul(id)), load_cloud((fs::path(eval_data) / src).string()),
                         templates.at(tmpl), load_transform((fs::path(eval_data) / tgt).string())});
      }
      const LoadedModel model = load_model(eval_model, cfg);
      const auto records = benchmark(methods_from(eval_methods, model, cfg), pairs);
      write_benchmark_outputs(records, eval_records, eval_summary);
      return 0;
    }

    if (bench->parsed()) {
      RunConfig cfg = load_config(bench_config);
      const DatasetSpec spec = dataset_from(cfg);
      const auto seed = bench_seed.value_or(static_cast<std::uint64_t>(cfg.get_long("test_seed", 1000003)));
      const auto count = static_cast<std::size_t>(cfg.get_long("test_pairs", 100));
      const auto pairs = to_benchmark(spec, generate_pairs(spec, count, seed));
      const LoadedModel model = load_model(cfg.get_string("model", ""), cfg);
      std::vector<std::string> names = cfg.get_list("methods");
      if (names.empty()) names = model.f32 ? std::vector<std::string>{"icp", "pcrnet", "ipcrnet"} : std::vector<std::string>{"icp"};
      const auto records = benchmark(methods_from(names, model, cfg), pairs);
      const fs::path dir = bench_out.empty() ? fs::path(cfg.get_string("output_dir", ".")) : fs::path(bench_out);
      fs::create_directories(dir);
      write_benchmark_outputs(records, (dir / cfg.get_string("records_csv", "records.csv")).string(),
                              (dir / cfg.get_string("summary_csv", "summary.csv")).string());
      return 0;
    }

    if (gc->parsed()) {
      const auto report = run_grad_check(parse_grad_check_scope(gc_scope), gc_tol, gc_seed, gc_points);
      std::cout << format_grad_check(report);
      return report.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
