#include "irisforge/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "irisforge/error.hpp"
#include "irisforge/eval.hpp"
#include "irisforge/json_io.hpp"
#include "irisforge/nn/kernels.hpp"
#include "irisforge/synthesis.hpp"
#include "irisforge/toydata.hpp"
#include "irisforge/training.hpp"
#include "irisforge/util.hpp"

namespace irisforge {

void to_json(json& j, const ClassifierConfig& c) {
  j = json{{"steps", c.steps},
           {"triplets", c.triplets},
           {"lr", c.lr},
           {"margin", c.margin},
           {"holdout_every", c.holdout_every}};
}

void from_json(const json& j, ClassifierConfig& c) {
  json defaults;
  to_json(defaults, c);
  for (const auto& [k, v] : j.items())
    if (!defaults.contains(k)) throw ConfigError("unknown classifier config key: " + k);
  c.steps = j.value("steps", c.steps);
  c.triplets = j.value("triplets", c.triplets);
  c.lr = j.value("lr", c.lr);
  c.margin = j.value("margin", c.margin);
  c.holdout_every = j.value("holdout_every", c.holdout_every);
  if (c.steps < 0 || c.triplets < 1) throw ConfigError("classifier steps/triplets out of range");
}

void to_json(json& j, const GenerationConfig& c) { j = json{{"eps_min", c.eps_min}, {"eps_max", c.eps_max}}; }

void from_json(const json& j, GenerationConfig& c) {
  for (const auto& [k, v] : j.items())
    if (k != "eps_min" && k != "eps_max") throw ConfigError("unknown generation config key: " + k);
  c.eps_min = j.value("eps_min", c.eps_min);
  c.eps_max = j.value("eps_max", c.eps_max);
}

}  // namespace irisforge

namespace irisforge::cli {
namespace {

namespace fs = std::filesystem;

// One flag that may also come from the JSON config file; flags win.
struct Binding {
  std::string name;
  CLI::Option* opt;
  bool required;
  std::function<void(const json&)> load;
  std::function<json()> save;
};

// Nested config object, e.g. "net" or "train".
struct Section {
  std::string name;
  std::function<void(const json&)> load;
  std::function<json()> save;
};

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<Binding> flags;
  std::vector<Section> sections;
  std::set<std::string> keys;
  std::function<void(const json& resolved)> body;

  void claim(const std::string& key) {
    if (!keys.insert(key).second) throw std::logic_error("config key bound twice: " + key);
  }

  template <class T>
  void flag(const std::string& name, T& var, const std::string& desc, bool required = false) {
    claim(name);
    CLI::Option* o = app->add_option("--" + name, var, desc);
    flags.push_back({name, o, required, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }});
  }

  template <class T>
  void section(const std::string& name, T& var) {
    claim(name);
    sections.push_back({name, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }});
  }

  // Applies the config file, then checks required flags. Returns the snapshot.
  json resolve() {
    json cfg = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config file " + config_path);
      try {
        f >> cfg;
      } catch (const json::exception& e) {
        throw ConfigError("malformed config file " + config_path + ": " + e.what());
      }
      if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
    }
    std::set<std::string> known;
    for (auto& s : sections) {
      known.insert(s.name);
      if (cfg.contains(s.name)) s.load(cfg[s.name]);
    }
    for (auto& b : flags) {
      known.insert(b.name);
      if (b.opt->count() == 0 && cfg.contains(b.name)) b.load(cfg[b.name]);
      else if (b.opt->count() == 0 && b.required) throw ConfigError("--" + b.name + " is required");
    }
    for (const auto& [k, v] : cfg.items())
      if (!known.count(k)) throw ConfigError("unknown config key for " + app->get_name() + ": " + k);
    json snap = json::object();
    for (auto& s : sections) snap[s.name] = s.save();
    for (auto& b : flags)
      if (b.opt->count() > 0 || cfg.contains(b.name) || !b.required) snap[b.name] = b.save();
    return snap;
  }
};

void write_snapshot(const fs::path& out_dir, const std::string& command, const json& snap) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::ofstream f(out_dir / "resolved_config.json");
  if (!f) throw IoError("cannot write " + (out_dir / "resolved_config.json").string());
  json j = snap;
  j["command"] = command;
  f << j.dump(1) << '\n';
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

json classifier_report_json(const ClassifierReport& r) {
  return json{{"tar_at_far_0.1", r.tar_at_far10},
              {"genuine_mean_distance", r.genuine_mean_distance},
              {"impostor_mean_distance", r.impostor_mean_distance},
              {"final_loss", r.final_loss},
              {"train_samples", r.train_samples},
              {"heldout_samples", r.heldout_samples}};
}

int thread_budget(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("IRISFORGE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("IRISFORGE_THREADS must be a positive integer, got '") + env + "'");
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Toy iris synthesis with identity/style disentanglement", "irisforge"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (fallback: IRISFORGE_THREADS)")->check(CLI::NonNegativeNumber);

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& desc) -> Command& {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, desc);
    c->app->add_option("--config", c->config_path, "JSON config; flags override its keys");
    commands.push_back(std::move(c));
    return *commands.back();
  };

  // make-toy
  struct {
    int ids = 20, styles = 10, size = 64;
    double test_fraction = 0.0;
    std::uint64_t seed = 0;
    std::string out;
  } toy;
  {
    auto& c = add("make-toy", "Render a procedural iris dataset");
    c.flag("ids", toy.ids, "Number of identities");
    c.flag("styles", toy.styles, "Images per identity");
    c.flag("size", toy.size, "Image side in pixels");
    c.flag("test-fraction", toy.test_fraction, "If > 0, also write identity-disjoint train/test manifests");
    c.flag("seed", toy.seed, "Seed", true);
    c.flag("out", toy.out, "Output directory", true);
    c.body = [&](const json& snap) {
      write_snapshot(toy.out, "make-toy", snap);
      const auto m = build_toy_dataset(toy.ids, toy.styles, toy.size, toy.seed, toy.out);
      json r{{"manifest", (fs::path(toy.out) / "manifest.json").string()},
             {"images", m.samples.size()},
             {"hash", hex64(manifest_content_hash(m))}};
      if (toy.test_fraction > 0.0) {
        auto [tr, te] = split_dataset(m, 1.0 - toy.test_fraction, toy.seed);
        save_manifest(tr, fs::path(toy.out) / "manifest_train.json");
        save_manifest(te, fs::path(toy.out) / "manifest_test.json");
        r["train_images"] = tr.samples.size();
        r["test_images"] = te.samples.size();
      }
      print(r);
    };
  }

  // pretrain-classifier
  struct {
    std::string data, out;
    std::uint64_t seed = 0;
    int steps = -1, triplets = -1;
    NetConfig net;
    ClassifierConfig cls;
  } pre;
  {
    auto& c = add("pretrain-classifier", "Triplet-train the identity feature network");
    c.flag("data", pre.data, "Training manifest", true);
    c.flag("out", pre.out, "Output directory", true);
    c.flag("seed", pre.seed, "Seed", true);
    c.section("net", pre.net);
    c.section("classifier", pre.cls);
    c.app->add_option("--steps", pre.steps, "Overrides classifier.steps");
    c.app->add_option("--triplets", pre.triplets, "Overrides classifier.triplets");
    c.body = [&](json snap) {
      if (pre.steps >= 0) pre.cls.steps = pre.steps;
      if (pre.triplets > 0) pre.cls.triplets = pre.triplets;
      pre.net.validate();
      snap["classifier"] = pre.cls;
      write_snapshot(pre.out, "pretrain-classifier", snap);
      const auto m = load_manifest(pre.data);
      auto b = build_models(pre.net, pre.seed);
      const auto rep = pretrain_classifier(*b, m, pre.cls, pre.seed);
      save_checkpoint(*b, fs::path(pre.out) / "classifier.ifg");
      const json r = classifier_report_json(rep);
      std::ofstream(fs::path(pre.out) / "classifier_report.json") << r.dump(1) << '\n';
      print(r);
    };
  }

  // train
  struct {
    std::string data, out, classifier;
    std::uint64_t seed = 0;
    int steps = -1, batch = -1;
    NetConfig net;
    TrainConfig tc;
    ClassifierConfig cls;
  } tr;
  {
    auto& c = add("train", "Train encoders, warps, generator and critic");
    c.flag("data", tr.data, "Training manifest", true);
    c.flag("out", tr.out, "Output directory", true);
    c.flag("seed", tr.seed, "Seed", true);
    c.flag("classifier", tr.classifier, "Pretrained classifier checkpoint (pretrains in-process if empty)");
    c.section("net", tr.net);
    c.section("train", tr.tc);
    c.section("pretrain", tr.cls);
    c.app->add_option("--steps", tr.steps, "Overrides train.steps");
    c.app->add_option("--batch", tr.batch, "Overrides train.batch");
    c.body = [&](json snap) {
      if (tr.steps >= 0) tr.tc.steps = tr.steps;
      if (tr.batch > 0) tr.tc.batch = tr.batch;
      tr.tc.seed = tr.seed;
      std::unique_ptr<ModelBundle> cls_src;
      if (!tr.classifier.empty()) {
        cls_src = load_checkpoint(tr.classifier);
        if (!cls_src->classifier_frozen) throw CheckpointError("classifier checkpoint is not frozen: " + tr.classifier);
        tr.net = cls_src->cfg;
      }
      tr.net.validate();
      tr.tc.validate();
      snap["net"] = tr.net;
      snap["train"] = tr.tc;
      snap["pretrain"] = tr.cls;
      write_snapshot(tr.out, "train", snap);
      const auto m = load_manifest(tr.data);
      auto b = build_models(tr.net, tr.seed);
      json r;
      if (cls_src) {
        copy_classifier(*b, *cls_src);
      } else {
        r["classifier"] = classifier_report_json(pretrain_classifier(*b, m, tr.cls, tr.seed));
      }
      const auto res = train(*b, tr.tc, m, tr.out);
      r["checkpoint"] = res.checkpoint.string();
      r["steps"] = res.log.size();
      r["checkpoint_hash"] = hex64(b->hash());
      print(r);
    };
  }

  // generate
  struct {
    std::string checkpoint, data, out;
    int ids = 50, styles = 5;
    std::uint64_t seed = 0;
    GenerationConfig gen;
  } gen;
  {
    auto& c = add("generate", "Mint new identities and render them under sampled styles");
    c.flag("checkpoint", gen.checkpoint, "Trained checkpoint", true);
    c.flag("data", gen.data, "Source (training) manifest", true);
    c.flag("out", gen.out, "Output directory", true);
    c.flag("ids", gen.ids, "Identities to mint");
    c.flag("styles", gen.styles, "Images per minted identity");
    c.flag("seed", gen.seed, "Seed", true);
    c.section("generation", gen.gen);
    c.body = [&](const json& snap) {
      write_snapshot(gen.out, "generate", snap);
      const auto b = load_checkpoint(gen.checkpoint);
      const auto src = load_manifest(gen.data);
      const auto m = generate_dataset(*b, src, gen.ids, gen.styles, gen.seed, gen.out, gen.gen);
      print(json{{"manifest", (fs::path(gen.out) / "manifest.json").string()},
                 {"images", m.samples.size()},
                 {"hash", hex64(manifest_content_hash(m))}});
    };
  }

  // eval-quality
  struct {
    std::string data, out;
  } eq;
  {
    auto& c = add("eval-quality", "Quality histogram and rejection rate");
    c.flag("data", eq.data, "Manifest to score", true);
    c.flag("out", eq.out, "Output directory", true);
    c.body = [&](const json& snap) {
      write_snapshot(eq.out, "eval-quality", snap);
      const auto r = quality_experiment(load_manifest(eq.data), eq.out);
      print(json{{"images", r.overall.size()}, {"rejection_rate", r.rejection_rate}, {"failed", r.failed_bucket}});
    };
  }

  // eval-uniqueness
  struct {
    std::string real, synth, provenance, out;
    std::size_t budget = kDefaultPairBudget;
    std::uint64_t seed = 0;
  } eu;
  {
    auto& c = add("eval-uniqueness", "Match-score distributions for real and synthetic sets");
    c.flag("real", eu.real, "Real (training) manifest", true);
    c.flag("synth", eu.synth, "Synthetic manifest", true);
    c.flag("provenance", eu.provenance, "Provenance file (default: next to the synthetic manifest)");
    c.flag("budget", eu.budget, "Pairs per distribution");
    c.flag("seed", eu.seed, "Seed", true);
    c.flag("out", eu.out, "Output directory", true);
    c.body = [&](json snap) {
      if (eu.provenance.empty()) eu.provenance = (fs::path(eu.synth).parent_path() / "provenance.json").string();
      snap["provenance"] = eu.provenance;
      write_snapshot(eu.out, "eval-uniqueness", snap);
      const auto r = uniqueness_experiment(load_manifest(eu.real), load_manifest(eu.synth),
                                           load_provenance(eu.provenance), eu.budget, eu.seed, eu.out);
      const auto& s = r.summary;
      print(json{{"mean_genuine_real", s.mean_genuine_real},
                 {"mean_impostor_real", s.mean_impostor_real},
                 {"mean_synth_vs_source", s.mean_synth_vs_source},
                 {"mean_synth_genuine", s.mean_synth_genuine},
                 {"mean_synth_impostor", s.mean_synth_impostor}});
    };
  }

  // eval-utility
  struct {
    std::string real_train, synth_train, test, out;
    std::uint64_t seed = 0;
    int steps = -1, triplets = -1;
    UtilityConfig cfg;
  } ut;
  {
    auto& c = add("eval-utility", "Verification with and without synthetic training data");
    c.flag("real-train", ut.real_train, "Real training manifest", true);
    c.flag("synth-train", ut.synth_train, "Synthetic training manifest", true);
    c.flag("test", ut.test, "Identity-disjoint test manifest", true);
    c.flag("seed", ut.seed, "Seed", true);
    c.flag("out", ut.out, "Output directory", true);
    c.section("net", ut.cfg.net);
    c.section("classifier", ut.cfg.classifier);
    c.app->add_option("--steps", ut.steps, "Overrides classifier.steps");
    c.app->add_option("--triplets", ut.triplets, "Overrides classifier.triplets");
    c.body = [&](json snap) {
      if (ut.steps >= 0) ut.cfg.classifier.steps = ut.steps;
      if (ut.triplets > 0) ut.cfg.classifier.triplets = ut.triplets;
      ut.cfg.net.validate();
      snap["classifier"] = ut.cfg.classifier;
      write_snapshot(ut.out, "eval-utility", snap);
      const auto r = utility_experiment(load_manifest(ut.real_train), load_manifest(ut.synth_train),
                                        load_manifest(ut.test), ut.cfg, ut.seed, ut.out);
      print(json{{"tar_at_far_0.1", {{"real", r.real_only.tar_far_01}, {"real_synth", r.real_synth.tar_far_01}}},
                 {"tar_at_far_0.01", {{"real", r.real_only.tar_far_001}, {"real_synth", r.real_synth.tar_far_001}}},
                 {"delta_tar_at_far_0.1", r.delta_far_01},
                 {"delta_tar_at_far_0.01", r.delta_far_001}});
    };
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    nn::set_num_threads(thread_budget(threads));
    for (auto& c : commands) {
      if (!c->app->parsed()) continue;
      json snap;
      try {
        snap = c->resolve();
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
      }
      c->body(snap);
    }
    return kExitOk;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace irisforge::cli
