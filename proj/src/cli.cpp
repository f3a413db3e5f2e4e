// SPDX-License-Identifier: Apache-2.0

#include "gwseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "gwseg/bundle_io.hpp"
#include "gwseg/config.hpp"
#include "gwseg/evaluation.hpp"
#include "gwseg/pipeline.hpp"
#include "gwseg/point_cloud.hpp"
#include "gwseg/prototypes.hpp"
#include "gwseg/synthetic.hpp"

namespace gwseg {

namespace {

namespace fs = std::filesystem;

// Config file, then --set entries, then dedicated flags.
struct ConfigSources {
  std::string file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override a configuration key (key=value)");
  }

  template <typename T>
  void flag(CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        name, [this, key](const std::string& v) { flags.emplace_back(key, v); }, help)
        ->type_name(std::is_floating_point_v<T> ? "FLOAT" : "INT");
  }

  WorkspaceConfig resolve() const {
    WorkspaceConfig cfg;
    if (!file.empty()) cfg.load_file(file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) cfg.set(k, v);
    cfg.validate();
    return cfg;
  }
};

std::vector<PointCloud> load_clouds(const std::vector<std::string>& paths) {
  std::vector<PointCloud> clouds;
  for (const auto& p : paths) clouds.push_back(load_point_cloud(p));
  return clouds;
}

fs::path sidecar(const std::string& cloud_path, const char* kind) {
  return fs::path(cloud_path + "." + kind + ".gwfeat");
}

// Ingested features live next to each cloud as <cloud>.low.gwfeat and
// <cloud>.sem.gwfeat. Handcrafted features need no provider.
std::vector<FeatureProvider> providers_for(const Hyperparameters& hyper,
                                           const std::vector<std::string>& paths,
                                           const std::vector<PointCloud>& clouds) {
  std::vector<FeatureProvider> out;
  if (hyper.feature_source != FeatureSource::Ingested) return out;
  for (std::size_t c = 0; c < paths.size(); ++c) {
    out.push_back(ingested_provider(ingest_features(sidecar(paths[c], "low"), clouds[c].size()),
                                    ingest_features(sidecar(paths[c], "sem"), clouds[c].size())));
  }
  return out;
}

std::vector<std::size_t> total_label_counts(const std::vector<PointCloud>& clouds) {
  std::vector<std::size_t> total;
  for (const auto& cloud : clouds) {
    if (!cloud.has_labels()) throw InvariantError("training data must be labeled");
    const auto h = label_histogram(*cloud.labels);
    if (h.size() > total.size()) total.resize(h.size(), 0);
    for (std::size_t c = 0; c < h.size(); ++c) total[c] += h[c];
  }
  return total;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

std::string report_csv(const EvalReport& report, const ClassRegistry& registry) {
  std::ostringstream s;
  write_report_csv(s, report, registry);
  return s.str();
}

int cmd_synth(const std::string& preset, std::uint64_t seed, const std::string& out_path,
              std::ostream& out) {
  const PointCloud cloud = generate_synthetic_scene(make_preset_scene(preset, seed));
  save_point_cloud(cloud, out_path);
  out << "wrote " << cloud.size() << " points to " << out_path << '\n';
  return 0;
}

struct BuildVocabArgs {
  std::vector<std::string> data;
  std::string out;
  std::string names;
  ConfigSources config;
};

int cmd_build_vocab(const BuildVocabArgs& a, std::ostream& out) {
  const WorkspaceConfig cfg = a.config.resolve();
  const auto clouds = load_clouds(a.data);
  const auto counts = total_label_counts(clouds);

  ModelBundle bundle;
  bundle.hyper = cfg.hyper;
  bundle.registry = split_classes(counts, cfg.novel_count);
  const auto names = a.names.empty() ? std::vector<std::string>{} : split_list(a.names);
  if (names.empty() && counts.size() == room_class_names().size()) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      bundle.registry.names[static_cast<ClassId>(c)] = room_class_names()[c];
    }
  }
  for (std::size_t c = 0; c < names.size(); ++c) bundle.registry.names[static_cast<ClassId>(c)] = names[c];

  const auto providers = providers_for(cfg.hyper, a.data, clouds);
  const auto blocks = encode_clouds(clouds, cfg.hyper, cfg.sampling_seed(), providers);
  KMeansConfig km = cfg.kmeans;
  km.seed = derive_seed(cfg.seed, 1);
  bundle.vocab = build_base_vocabulary(blocks, bundle.registry, cfg.hyper.words, km,
                                       cfg.vocab_max_descriptors);
  bundle.validate(false);
  save_bundle(bundle, a.out);
  out << "vocabulary of " << bundle.vocab.size() << " words, "
      << bundle.registry.base_classes.size() << " base and " << bundle.registry.novel_classes.size()
      << " novel classes -> " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string bundle;
  std::vector<std::string> data;
  std::string out;
  std::string log;
  ConfigSources config;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const WorkspaceConfig cfg = a.config.resolve();
  ModelBundle bundle = load_bundle(a.bundle);
  const auto clouds = load_clouds(a.data);
  const auto providers = providers_for(bundle.hyper, a.data, clouds);
  const auto blocks = encode_clouds(clouds, bundle.hyper, cfg.sampling_seed(), providers);

  TrainingConfig tc = cfg.training;
  tc.seed = derive_seed(cfg.seed, 2);
  std::ostringstream log;
  log << "epoch,loss,accuracy\n" << std::setprecision(17);
  train_bundle(bundle, blocks, tc, [&](const EpochLog& e) {
    log << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
  });
  round_to_storage_precision(bundle);
  save_bundle(bundle, a.out);
  if (!a.log.empty()) write_text(a.log, log.str());
  out << "trained " << blocks.size() << " blocks for " << tc.epochs << " epochs -> " << a.out << '\n';
  return 0;
}

struct RegisterArgs {
  std::string bundle;
  std::vector<std::string> support;
  std::string out;
  int shots = 5;
  std::size_t min_foreground = 100;
  std::uint64_t seed = 0;
};

int cmd_register(const RegisterArgs& a, std::ostream& out) {
  ModelBundle bundle = load_bundle(a.bundle);
  if (bundle.fusion.weight.size() == 0 || !bundle.fusion.trained) {
    throw InvariantError("register needs a trained bundle");
  }
  const auto clouds = load_clouds(a.support);
  FeatureProvider provider;
  if (bundle.hyper.feature_source == FeatureSource::Ingested) {
    if (clouds.size() != 1) {
      throw Error("ingested features need exactly one support cloud");
    }
    provider = providers_for(bundle.hyper, a.support, clouds).front();
  } else {
    provider = handcrafted_provider(bundle.hyper.features);
  }
  SupportConfig sc;
  sc.shots = a.shots;
  sc.min_foreground = a.min_foreground;
  sc.sampling = bundle.hyper.sampling;
  const SupportSet support = build_support_set(clouds, bundle.registry, sc, a.seed);
  register_support(bundle, support, provider);
  round_to_storage_precision(bundle);
  bundle.validate(true);
  save_bundle(bundle, a.out);
  out << "registered " << support.classes.size() << " novel classes (" << a.shots
      << "-shot, seed " << a.seed << ") -> " << a.out << '\n';
  return 0;
}

struct SegmentArgs {
  std::string bundle;
  std::string input;
  std::string out;
  std::optional<double> beta;
  std::optional<double> tau;
  std::uint64_t seed = 0;
};

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  ModelBundle bundle = load_bundle(a.bundle);
  if (a.beta) bundle.hyper.beta = *a.beta;
  if (a.tau) bundle.hyper.tau = *a.tau;
  bundle.validate(true);
  PointCloud cloud = load_point_cloud(a.input);
  const std::vector<std::string> paths{a.input};
  const auto providers = providers_for(bundle.hyper, paths, {cloud});
  cloud.labels = segment_scene(cloud, bundle, a.seed, providers.empty() ? FeatureProvider{} : providers[0]);
  save_point_cloud(cloud, a.out);
  out << "segmented " << cloud.size() << " points -> " << a.out << '\n';
  return 0;
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string bundle;
  std::string novel;
  int classes = 0;
  std::string out;
  std::uint64_t seed = 0;
  int shots = 0;
  std::vector<std::string> aggregate;
};

// Without a bundle or --novel, the split follows build-vocab: the classes
// with the fewest ground-truth points are novel, keeping at least one base.
ClassRegistry eval_registry(const EvalArgs& a, int observed_classes, std::span<const ClassId> gt) {
  if (!a.bundle.empty()) return load_bundle(a.bundle).registry;
  const int n = std::max(a.classes, observed_classes);
  ClassRegistry reg;
  if (a.novel.empty()) {
    auto counts = label_histogram(gt);
    counts.resize(static_cast<std::size_t>(n), 0);
    reg = split_classes(counts, std::min<std::size_t>(WorkspaceConfig{}.novel_count, n - 1));
  } else {
    std::vector<bool> novel(static_cast<std::size_t>(n), false);
    for (const auto& item : split_list(a.novel)) {
      int id = 0;
      try {
        id = std::stoi(item);
      } catch (const std::exception&) {
        throw Error("--novel expects class ids, got '" + item + "'");
      }
      if (id < 0 || id >= n) throw Error("--novel class " + item + " is out of range");
      novel[static_cast<std::size_t>(id)] = true;
    }
    for (int c = 0; c < n; ++c) (novel[c] ? reg.novel_classes : reg.base_classes).push_back(c);
  }
  if (n == static_cast<int>(room_class_names().size())) {
    for (int c = 0; c < n; ++c) reg.names[c] = room_class_names()[c];
  }
  return reg;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!a.aggregate.empty()) {
    std::vector<EvalReport> reports;
    for (const auto& path : a.aggregate) {
      std::ifstream f(path);
      if (!f) throw Error("cannot open report " + path);
      reports.push_back(read_report_csv(f));
    }
    std::ostringstream s;
    write_aggregate_csv(s, aggregate_reports(reports));
    if (!a.out.empty()) write_text(a.out, s.str());
    out << s.str();
    return 0;
  }
  if (a.pred.empty() || a.gt.empty()) throw Error("eval needs --pred and --gt, or --aggregate");
  const PointCloud pred = load_point_cloud(a.pred);
  const PointCloud gt = load_point_cloud(a.gt);
  if (!pred.has_labels() || !gt.has_labels()) throw InvariantError("eval inputs must be labeled");
  if (pred.size() != gt.size()) {
    throw InvariantError("prediction has " + std::to_string(pred.size()) +
                         " points but ground truth has " + std::to_string(gt.size()));
  }
  int observed = 0;
  for (ClassId c : *pred.labels) observed = std::max(observed, c + 1);
  for (ClassId c : *gt.labels) observed = std::max(observed, c + 1);
  const ClassRegistry reg = eval_registry(a, observed, *gt.labels);
  EvalReport report =
      miou_report(confusion_matrix(*pred.labels, *gt.labels, static_cast<int>(reg.class_count())), reg);
  report.seed = a.seed;
  report.shots = a.shots;
  if (!a.out.empty()) write_text(a.out, report_csv(report, reg));
  write_report_table(out, report, reg);
  return 0;
}

int cmd_inspect_vocab(const std::string& bundle_path, const std::string& out_path, std::ostream& out) {
  const ModelBundle bundle = load_bundle(bundle_path);
  std::ostringstream s;
  s << "word,members\n";
  for (std::size_t w = 0; w < bundle.vocab.member_counts.size(); ++w) {
    s << w << ',' << bundle.vocab.member_counts[w] << '\n';
  }
  if (!out_path.empty()) write_text(out_path, s.str());
  out << s.str();
  return 0;
}

int cmd_inspect_proto(const std::string& bundle_path, ClassId cls, const std::string& out_path,
                      std::ostream& out) {
  const ModelBundle bundle = load_bundle(bundle_path);
  const auto it = bundle.classes.find(cls);
  if (it == bundle.classes.end()) throw Error("bundle has no prototypes for class " + std::to_string(cls));
  std::ostringstream s;
  s << "word,unpruned,pruned\n" << std::setprecision(9);
  for (Eigen::Index w = 0; w < it->second.geometric.histogram.size(); ++w) {
    s << w << ',' << it->second.geometric.histogram[w] << ',' << it->second.pruned.histogram[w] << '\n';
  }
  if (!out_path.empty()) write_text(out_path, s.str());
  out << s.str();
  return 0;
}

}  // namespace

int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized few-shot point cloud segmentation with geometric words", "gwseg"};
  app.require_subcommand(1);

  std::string preset = "room";
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic scene");
  synth->add_option("--preset", preset, "room | two-planes");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();

  BuildVocabArgs bv;
  auto* build = app.add_subcommand("build-vocab", "split classes and mine the geometric vocabulary");
  build->add_option("--data", bv.data, "labeled training clouds")->required()->check(CLI::ExistingFile);
  build->add_option("--out", bv.out)->required();
  build->add_option("--names", bv.names, "comma-separated class names");
  bv.config.add_to(build);
  bv.config.flag<int>(build, "--words", "words", "vocabulary size H");
  bv.config.flag<int>(build, "--novel-count", "novel_count", "classes held out as novel");
  bv.config.flag<int>(build, "--seed", "seed", "master seed");
  bv.config.flag<double>(build, "--block-size", "block_size", "block edge length");
  bv.config.flag<int>(build, "--points-per-block", "points_per_block", "points sampled per block");
  bv.config.flag<double>(build, "--tau", "tau", "softmax temperature");
  bv.config.flag<double>(build, "--alpha", "alpha", "frequency limit");
  bv.config.flag<double>(build, "--beta", "beta", "re-weighting factor");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train the fusion head and base prototypes");
  train->add_option("--bundle", tr.bundle)->required()->check(CLI::ExistingFile);
  train->add_option("--data", tr.data)->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr.out)->required();
  train->add_option("--log", tr.log, "per-epoch CSV log");
  tr.config.add_to(train);
  tr.config.flag<int>(train, "--epochs", "epochs", "training epochs");
  tr.config.flag<double>(train, "--lr", "learning_rate", "learning rate");
  tr.config.flag<int>(train, "--seed", "seed", "master seed");

  RegisterArgs rg;
  auto* reg = app.add_subcommand("register", "add novel-class prototypes from a support set");
  reg->add_option("--bundle", rg.bundle)->required()->check(CLI::ExistingFile);
  reg->add_option("--support", rg.support)->required()->check(CLI::ExistingFile);
  reg->add_option("--out", rg.out)->required();
  reg->add_option("--shots", rg.shots)->check(CLI::PositiveNumber);
  reg->add_option("--min-foreground", rg.min_foreground);
  reg->add_option("--seed", rg.seed);

  SegmentArgs sg;
  auto* seg = app.add_subcommand("segment", "label every point of a cloud");
  seg->add_option("--bundle", sg.bundle)->required()->check(CLI::ExistingFile);
  seg->add_option("--input", sg.input)->required()->check(CLI::ExistingFile);
  seg->add_option("--out", sg.out)->required();
  seg->add_option("--beta", sg.beta);
  seg->add_option("--tau", sg.tau);
  seg->add_option("--seed", sg.seed);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--pred", ev.pred)->check(CLI::ExistingFile);
  eval->add_option("--gt", ev.gt)->check(CLI::ExistingFile);
  eval->add_option("--bundle", ev.bundle, "take the class split from a bundle")->check(CLI::ExistingFile);
  eval->add_option("--novel", ev.novel, "comma-separated novel class ids");
  eval->add_option("--classes", ev.classes, "class count when no bundle is given");
  eval->add_option("--out", ev.out, "report CSV");
  eval->add_option("--seed", ev.seed, "recorded in the report");
  eval->add_option("--shots", ev.shots, "recorded in the report");
  eval->add_option("--aggregate", ev.aggregate, "report CSVs to summarize")->check(CLI::ExistingFile);

  std::string inspect_bundle, inspect_out;
  ClassId inspect_class = 0;
  auto* inspect = app.add_subcommand("inspect", "dump bundle contents as CSV");
  inspect->require_subcommand(1);
  auto* iv = inspect->add_subcommand("vocab", "per-word member counts");
  iv->add_option("--bundle", inspect_bundle)->required()->check(CLI::ExistingFile);
  iv->add_option("--out", inspect_out);
  auto* ip = inspect->add_subcommand("proto", "geometric prototype of one class");
  ip->add_option("--bundle", inspect_bundle)->required()->check(CLI::ExistingFile);
  ip->add_option("--class", inspect_class)->required();
  ip->add_option("--out", inspect_out);

  std::vector<std::string> argv_store{"gwseg"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "gwseg: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*synth) return cmd_synth(preset, synth_seed, synth_out, out);
    if (*build) return cmd_build_vocab(bv, out);
    if (*train) return cmd_train(tr, out);
    if (*reg) return cmd_register(rg, out);
    if (*seg) return cmd_segment(sg, out);
    if (*eval) return cmd_eval(ev, out);
    if (*iv) return cmd_inspect_vocab(inspect_bundle, inspect_out, out);
    if (*ip) return cmd_inspect_proto(inspect_bundle, inspect_class, inspect_out, out);
  } catch (const std::exception& e) {
    err << "gwseg: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace gwseg
