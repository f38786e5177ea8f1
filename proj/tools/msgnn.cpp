// Command line front end: dataset generation and labeling, the local
// approximation and exact solvers on single instances, model training,
// evaluation, layer sweeps, cross-dataset tables, and a selftest.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msgnn/selftest.hpp"
#include "msgnn/train_eval.hpp"

namespace fs = std::filesystem;
using namespace msgnn;

namespace {

void print_config(std::initializer_list<std::pair<std::string, std::string>> kv) {
  std::cout << "config:";
  for (const auto& [k, v] : kv) std::cout << ' ' << k << '=' << v;
  std::cout << '\n';
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

CnfFormula load_cnf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_dimacs(in);
}

std::vector<int> indices_for(const LoadedDataset& ds, const std::string& split) {
  if (split == "all") return ds.all_indices();
  return ds.split_indices(split_from_name(split));
}

void print_stats_row(const std::string& name, const EvalStats& st) {
  std::printf("%-12s ratio %-9s gap %-9s acc %-9s count %d\n", name.c_str(),
              fmt(st.mean_ratio).c_str(), fmt(st.mean_gap).c_str(), fmt(st.mean_acc).c_str(),
              st.count);
}

void write_instance_tsv(const std::string& path, const std::vector<InstanceEval>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "path\tn\tm\toptimum\tsatisfied\tratio\tacc\n";
  for (const InstanceEval& r : rows)
    out << r.path << '\t' << r.n << '\t' << r.m << '\t' << r.optimum << '\t' << r.satisfied
        << '\t' << fmt(static_cast<double>(r.satisfied) / r.optimum) << '\t' << fmt(r.acc)
        << '\n';
}

struct TrainFlags {
  std::string manifest;
  std::string model = "nsfg";
  int d = 64;
  int T = 10;
  double lr = 2e-5;
  double wd = 1e-10;
  int epochs = 150;
  std::int64_t batch_cap = 4000;
  std::uint64_t seed = 1;
  int threads = 1;

  TrainConfig to_config() const {
    TrainConfig cfg;
    cfg.model.kind = model_kind_from_name(model);
    cfg.model.d = d;
    cfg.model.T = T;
    cfg.lr = lr;
    cfg.weight_decay = wd;
    cfg.epochs = epochs;
    cfg.batch_node_cap = batch_cap;
    cfg.seed = seed;
    cfg.threads = threads;
    return cfg;
  }

  void add_to(CLI::App* cmd, bool with_T = true) {
    cmd->add_option("--manifest", manifest, "dataset manifest file")->required();
    cmd->add_option("--model", model, "model kind: nsfg|esfg")->check(CLI::IsMember({"nsfg", "esfg"}));
    cmd->add_option("--d", d, "embedding width");
    if (with_T) cmd->add_option("--T", T, "message passing layers");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--wd", wd, "weight decay");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch-cap", batch_cap, "max graph nodes per batch");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--threads", threads, "worker thread cap");
  }
};

void write_train_log(const std::string& path, const TrainResult& res) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const EpochLog& e : res.epochs) out << e.to_line() << '\n';
  out << "best epoch " << res.best_epoch << " val_ratio " << fmt(res.best_val_ratio) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MaxSAT solution prediction: message-passing models, exact labels, local baseline"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a random Max-kSAT dataset with manifest");
  int g_k = 0, g_n = 0, g_m = 0, g_count = 0;
  std::uint64_t g_seed = 1;
  std::string g_out;
  gen->add_option("--k", g_k, "literals per clause")->required();
  gen->add_option("--n", g_n, "variables per instance")->required();
  gen->add_option("--m", g_m, "clauses per instance")->required();
  gen->add_option("--count", g_count, "number of instances")->required();
  gen->add_option("--seed", g_seed, "dataset seed");
  gen->add_option("--out", g_out, "output directory")->required();

  // label
  auto* label = app.add_subcommand("label", "solve every instance of a manifest and write labels.txt");
  std::string l_manifest;
  int l_threads = 1;
  label->add_option("--manifest", l_manifest, "dataset manifest file")->required();
  label->add_option("--threads", l_threads, "worker thread cap");

  // train
  auto* train = app.add_subcommand("train", "train a model on a labeled dataset");
  TrainFlags t_flags;
  std::string t_out, t_log;
  t_flags.add_to(train);
  train->add_option("--out", t_out, "checkpoint output path")->required();
  train->add_option("--log", t_log, "training log path (default: <out>.log)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint plus baselines on a split");
  std::string e_ckpt, e_manifest, e_split = "test", e_tsv;
  std::uint64_t e_seed = 9;
  std::int64_t e_cap = 4000;
  eval->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
  eval->add_option("--manifest", e_manifest, "dataset manifest file")->required();
  eval->add_option("--split", e_split, "train|val|test|all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval->add_option("--eval-seed", e_seed, "seed for embedding init and seeded baselines");
  eval->add_option("--batch-cap", e_cap, "max graph nodes per batch");
  eval->add_option("--tsv", e_tsv, "write per-instance TSV here");

  // dla
  auto* dla = app.add_subcommand("dla", "run the one-round local approximation on a CNF file");
  std::string d_cnf, d_policy = "first";
  std::uint64_t d_seed = 0;
  dla->add_option("--cnf", d_cnf, "DIMACS CNF file")->required();
  dla->add_option("--policy", d_policy, "clause pick policy: first|random")
      ->check(CLI::IsMember({"first", "random"}));
  dla->add_option("--seed", d_seed, "seed for the random pick policy");

  // exact
  auto* exact = app.add_subcommand("exact", "solve a CNF file to optimality");
  std::string x_cnf, x_method = "bb";
  exact->add_option("--cnf", x_cnf, "DIMACS CNF file")->required();
  exact->add_option("--method", x_method, "bb|exhaustive")
      ->check(CLI::IsMember({"bb", "exhaustive"}));

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train across layer counts, report a table");
  TrainFlags s_flags;
  std::vector<int> s_ts;
  std::string s_tsv;
  s_flags.add_to(sweep, false);
  sweep->add_option("--T-list", s_ts, "layer counts, comma separated")->required()->delimiter(',');
  sweep->add_option("--tsv", s_tsv, "write the sweep table here");

  // cross
  auto* cross = app.add_subcommand("cross", "evaluate checkpoints across datasets");
  std::vector<std::string> c_ckpts, c_manifests;
  std::string c_split = "test", c_tsv;
  std::uint64_t c_seed = 9;
  std::int64_t c_cap = 4000;
  cross->add_option("--ckpt", c_ckpts, "checkpoint paths")->required();
  cross->add_option("--manifest", c_manifests, "dataset manifest files")->required();
  cross->add_option("--split", c_split, "train|val|test|all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  cross->add_option("--eval-seed", c_seed, "embedding init seed");
  cross->add_option("--batch-cap", c_cap, "max graph nodes per batch");
  cross->add_option("--tsv", c_tsv, "write the table here");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      print_config({{"k", std::to_string(g_k)},
                    {"n", std::to_string(g_n)},
                    {"m", std::to_string(g_m)},
                    {"count", std::to_string(g_count)},
                    {"seed", std::to_string(g_seed)},
                    {"out", g_out}});
      GenSpec spec{g_k, g_n, g_m, g_seed};
      DatasetManifest man = generate_dataset(spec, g_count, g_out);
      std::cout << "wrote " << man.count << " instances, manifest "
                << (fs::path(g_out) / "manifest.txt").string() << '\n';
    } else if (*label) {
      print_config({{"manifest", l_manifest}, {"threads", std::to_string(l_threads)}});
      std::vector<LabelRecord> labels = label_dataset(l_manifest, l_threads);
      double mean_opt = 0.0;
      for (const LabelRecord& r : labels) mean_opt += r.optimum;
      if (!labels.empty()) mean_opt /= static_cast<double>(labels.size());
      std::cout << "labeled " << labels.size() << " instances, mean optimum " << fmt(mean_opt)
                << ", wrote " << (fs::path(l_manifest).parent_path() / "labels.txt").string()
                << '\n';
    } else if (*train) {
      if (t_log.empty()) t_log = t_out + ".log";
      TrainConfig cfg = t_flags.to_config();
      print_config({{"manifest", t_flags.manifest},
                    {"model", t_flags.model},
                    {"d", std::to_string(cfg.model.d)},
                    {"T", std::to_string(cfg.model.T)},
                    {"lr", fmt_g(cfg.lr)},
                    {"wd", fmt_g(cfg.weight_decay)},
                    {"epochs", std::to_string(cfg.epochs)},
                    {"batch_cap", std::to_string(cfg.batch_node_cap)},
                    {"seed", std::to_string(cfg.seed)},
                    {"out", t_out}});
      LoadedDataset ds = load_dataset(t_flags.manifest, true);
      TrainResult res = train_model(cfg, ds, &std::cout);
      save_checkpoint(t_out, res.best);
      write_train_log(t_log, res);
      std::cout << "best epoch " << res.best_epoch << " val_ratio " << fmt(res.best_val_ratio)
                << ", checkpoint " << t_out << ", log " << t_log << ", "
                << fmt(res.train_seconds) << "s\n";
    } else if (*eval) {
      print_config({{"ckpt", e_ckpt},
                    {"manifest", e_manifest},
                    {"split", e_split},
                    {"eval_seed", std::to_string(e_seed)},
                    {"batch_cap", std::to_string(e_cap)}});
      Checkpoint ckpt = load_checkpoint(e_ckpt);
      LoadedDataset ds = load_dataset(e_manifest, true);
      std::vector<int> idx = indices_for(ds, e_split);
      std::vector<InstanceEval> rows;
      EvalStats st = evaluate_checkpoint(ckpt, ds, idx, e_seed, e_cap, &rows);
      print_stats_row(std::string("model-") + model_kind_name(ckpt.config.kind), st);
      for (Baseline b : {Baseline::Dla, Baseline::DlaRandomPick, Baseline::AllTrue,
                         Baseline::RandomCoin})
        print_stats_row(baseline_name(b), evaluate_baseline(ds, b, idx, e_seed));
      if (!e_tsv.empty()) {
        write_instance_tsv(e_tsv, rows);
        std::cout << "wrote " << e_tsv << '\n';
      }
    } else if (*dla) {
      print_config({{"cnf", d_cnf}, {"policy", d_policy}, {"seed", std::to_string(d_seed)}});
      CnfFormula f = load_cnf(d_cnf);
      Assignment a = run_dla(f, pick_policy_from_name(d_policy), d_seed);
      EvalResult r = eval_assignment(f, a);
      std::cout << "assignment " << assignment_to_string(a) << '\n';
      std::cout << "satisfied " << r.satisfied << '/' << r.total << '\n';
    } else if (*exact) {
      print_config({{"cnf", x_cnf}, {"method", x_method}});
      CnfFormula f = load_cnf(x_cnf);
      OptResult r = x_method == "bb" ? solve_branch_bound(f) : solve_exhaustive(f);
      std::cout << "optimum " << r.optimum << '\n';
      std::cout << "witness " << assignment_to_string(r.witness) << '\n';
      std::cout << "nodes " << r.nodes_explored << '\n';
    } else if (*sweep) {
      TrainConfig cfg = s_flags.to_config();
      std::ostringstream ts;
      for (size_t i = 0; i < s_ts.size(); ++i) ts << (i ? "," : "") << s_ts[i];
      print_config({{"manifest", s_flags.manifest},
                    {"model", s_flags.model},
                    {"d", std::to_string(cfg.model.d)},
                    {"T_list", ts.str()},
                    {"lr", fmt_g(cfg.lr)},
                    {"epochs", std::to_string(cfg.epochs)},
                    {"seed", std::to_string(cfg.seed)}});
      LoadedDataset ds = load_dataset(s_flags.manifest, true);
      std::vector<SweepRow> rows = layer_sweep(cfg, ds, s_ts, &std::cout);
      std::printf("%-4s %-10s %-10s %-10s %-10s %-10s\n", "T", "best_ep", "val_ratio",
                  "test_ratio", "test_gap", "test_acc");
      for (const SweepRow& r : rows)
        std::printf("%-4d %-10d %-10s %-10s %-10s %-10s\n", r.T, r.best_epoch,
                    fmt(r.val_ratio).c_str(), fmt(r.test_ratio).c_str(), fmt(r.test_gap).c_str(),
                    fmt(r.test_acc).c_str());
      if (!s_tsv.empty()) {
        std::ofstream out(s_tsv, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + s_tsv);
        out << "T\tbest_epoch\tval_ratio\ttest_ratio\ttest_gap\ttest_acc\n";
        for (const SweepRow& r : rows)
          out << r.T << '\t' << r.best_epoch << '\t' << fmt(r.val_ratio) << '\t'
              << fmt(r.test_ratio) << '\t' << fmt(r.test_gap) << '\t' << fmt(r.test_acc) << '\n';
        std::cout << "wrote " << s_tsv << '\n';
      }
    } else if (*cross) {
      print_config({{"split", c_split},
                    {"eval_seed", std::to_string(c_seed)},
                    {"batch_cap", std::to_string(c_cap)}});
      std::vector<fs::path> cps(c_ckpts.begin(), c_ckpts.end());
      std::vector<fs::path> mps(c_manifests.begin(), c_manifests.end());
      Split sp = c_split == "all" ? Split::Test : split_from_name(c_split);
      // "all" for cross tables means every split of each dataset.
      std::vector<CrossCell> cells;
      if (c_split == "all") {
        for (const auto& mp : mps) {
          LoadedDataset ds = load_dataset(mp, true);
          std::vector<int> idx = ds.all_indices();
          for (const auto& cp : cps) {
            Checkpoint ckpt = load_checkpoint(cp);
            cells.push_back(CrossCell{cp.string(), mp.string(),
                                      evaluate_checkpoint(ckpt, ds, idx, c_seed, c_cap)});
          }
        }
      } else {
        cells = cross_eval(cps, mps, sp, c_seed, c_cap);
      }
      std::printf("%-40s %-40s %-10s %-10s %-10s\n", "ckpt", "dataset", "ratio", "gap", "acc");
      for (const CrossCell& c : cells)
        std::printf("%-40s %-40s %-10s %-10s %-10s\n", c.ckpt.c_str(), c.dataset.c_str(),
                    fmt(c.stats.mean_ratio).c_str(), fmt(c.stats.mean_gap).c_str(),
                    fmt(c.stats.mean_acc).c_str());
      if (!c_tsv.empty()) {
        std::ofstream out(c_tsv, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + c_tsv);
        out << "ckpt\tdataset\tratio\tgap\tacc\tcount\n";
        for (const CrossCell& c : cells)
          out << c.ckpt << '\t' << c.dataset << '\t' << fmt(c.stats.mean_ratio) << '\t'
              << fmt(c.stats.mean_gap) << '\t' << fmt(c.stats.mean_acc) << '\t' << c.stats.count
              << '\n';
        std::cout << "wrote " << c_tsv << '\n';
      }
    } else if (*selftest) {
      if (!selftest_run(std::cout)) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
