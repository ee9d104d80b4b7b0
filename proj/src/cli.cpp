// Copyright 2026 The BCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bcs/cli.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bcs/arch.hpp"
#include "bcs/bicfg.hpp"
#include "bcs/checkpoint.hpp"
#include "bcs/dataset.hpp"
#include "bcs/error.hpp"
#include "bcs/features.hpp"
#include "bcs/listing.hpp"
#include "bcs/manifest.hpp"
#include "bcs/metrics.hpp"
#include "bcs/normalize.hpp"
#include "bcs/pseudo.hpp"
#include "bcs/train.hpp"

namespace bcs {

namespace fs = std::filesystem;

namespace {

std::optional<Arch> optional_arch(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_arch(text);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

// Manifest path beside a file output.
fs::path manifest_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

Sentence words(const std::string& line) { return tokenize_summary(line).tokens; }

struct Common {
  std::vector<std::string> argv;
  RunManifest manifest(const std::string& command) const {
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.started_at = utc_timestamp();
    return m;
  }
};

// --- dataset make ------------------------------------------------------------

struct DatasetMakeArgs {
  std::string stripped, named, src, arch, opt = "O1", split = "0.8,0.1,0.1", out;
  std::uint64_t seed = 0;
  bool by_project = false;
  bool no_split_strings = false;
};

int dataset_make(const DatasetMakeArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("dataset make");
  const auto arch = optional_arch(a.arch);
  const SplitRatios ratios = parse_ratios(a.split);
  PairOptions po;
  po.opt_level = parse_opt_level(a.opt);
  const auto stripped = parse_listing(a.stripped, arch);
  const auto named = parse_listing(a.named, arch);
  const auto summaries = extract_summaries(a.src);
  PairStats stats;
  auto samples = make_pairs(stripped, named, summaries, po, &stats);
  NormalizeOptions no;
  no.split_strings = !a.no_split_strings;
  for (auto& s : samples) s.tokens_asm = function_asm_tokens(s.function, no).tokens;
  split_dataset(samples, ratios, a.seed, a.by_project);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_dataset(dataset_file(dir), samples);
  const auto sizes = split_sizes(samples.size(), ratios);
  nlohmann::json report = {
      {"paired", stats.paired},
      {"stripped_without_named", stats.stripped_without_named},
      {"named_without_stripped", stats.named_without_stripped},
      {"no_summary", stats.no_summary},
      {"duplicate_summaries", stats.duplicate_summaries},
      {"summaries_extracted", summaries.size()},
      {"split", {{"train", sizes[0]}, {"valid", sizes[1]}, {"test", sizes[2]}}}};
  out << report.dump(2) << '\n';

  m.seed = a.seed;
  m.config = {{"arch", a.arch},
              {"opt", a.opt},
              {"split", a.split},
              {"by_project", a.by_project},
              {"split_strings", no.split_strings}};
  m.add_input(a.stripped);
  m.add_input(a.named);
  m.add_input(a.src);
  m.outputs = {dataset_file(dir).string()};
  m.write(dir / "run_manifest.json");
  return kExitOk;
}

// --- normalize ---------------------------------------------------------------

struct NormalizeArgs {
  std::string input, arch, out;
  bool no_split_strings = false;
};

int normalize_cmd(const NormalizeArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("normalize");
  NormalizeOptions no;
  no.split_strings = !a.no_split_strings;
  std::ostringstream buf;
  std::size_t unparsed = 0;
  for (const auto& f : parse_listing(a.input, optional_arch(a.arch))) {
    NormalizeStats st;
    const TokenSeq seq = normalize_function(f, profile_for(f.arch), no, &st);
    unparsed += st.unparsed;
    buf << nlohmann::json{{"name", f.name},
                          {"start", format_hex(f.start_addr)},
                          {"tokens", seq.tokens},
                          {"unparsed", st.unparsed}}
               .dump()
        << '\n';
  }
  if (unparsed) warn(std::to_string(unparsed) + " operand fragments were kept verbatim");
  m.config = {{"arch", a.arch}, {"split_strings", no.split_strings}};
  m.add_input(a.input);
  if (a.out.empty()) {
    out << buf.str();
  } else {
    write_text(a.out, buf.str());
    m.outputs = {a.out};
    m.write(manifest_for(a.out));
  }
  return kExitOk;
}

// --- cfg build ---------------------------------------------------------------

struct CfgArgs {
  std::string input, arch, out, dot;
};

int cfg_build(const CfgArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("cfg build");
  const auto functions = parse_listing(a.input, optional_arch(a.arch));
  std::ostringstream buf;
  for (const auto& f : functions) {
    const BiCfg g = build_bicfg(f);
    buf << graph_to_json(g).dump() << '\n';
    if (!a.dot.empty()) {
      fs::create_directories(a.dot);
      write_text(fs::path(a.dot) / (f.name + ".dot"), to_dot(g));
      m.outputs.push_back((fs::path(a.dot) / (f.name + ".dot")).string());
    }
  }
  m.config = {{"arch", a.arch}};
  m.add_input(a.input);
  if (a.out.empty()) {
    out << buf.str();
  } else {
    write_text(a.out, buf.str());
    m.outputs.push_back(a.out);
    m.write(manifest_for(a.out));
  }
  return kExitOk;
}

// --- refine ------------------------------------------------------------------

struct RefineArgs {
  std::string input, mode = "passthrough", mapping, endpoint, out;
  int timeout_ms = 10000;
  std::size_t max_connections = 4;
};

int refine_cmd(const RefineArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
  RunManifest m = common.manifest("refine");
  RefinerSpec spec;
  spec.mode = parse_refiner_mode(a.mode);
  if (!a.mapping.empty()) spec.mapping_path = a.mapping;
  if (!a.endpoint.empty()) spec.endpoint = a.endpoint;
  spec.timeout = std::chrono::milliseconds(a.timeout_ms);
  spec.max_connections = a.max_connections;
  const Refiner refiner(spec);

  std::vector<nlohmann::json> records;
  std::vector<std::string> texts;
  std::vector<std::size_t> owners;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(a.input)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(a.input + ": " + e.what(), lineno);
    }
    const auto& r = records.back();
    if (r.contains("pseudo") && r.at("pseudo").is_string()) {
      texts.push_back(r.at("pseudo").get<std::string>());
      owners.push_back(records.size() - 1);
    }
  }
  const auto refined = refiner.refine_all(texts);
  for (std::size_t k = 0; k < refined.size(); ++k) records[owners[k]]["pseudo"] = refined[k];
  std::ostringstream buf;
  for (const auto& r : records) buf << r.dump() << '\n';
  if (refiner.warnings()) {
    err << "refine: " << refiner.warnings() << " text(s) passed through unchanged after failures\n";
  }
  m.config = {{"mode", a.mode},
              {"mapping", a.mapping},
              {"endpoint", a.endpoint},
              {"timeout_ms", a.timeout_ms},
              {"max_connections", a.max_connections}};
  m.add_input(a.input);
  if (!a.mapping.empty()) m.add_input(a.mapping);
  if (a.out.empty()) {
    out << buf.str();
  } else {
    write_text(a.out, buf.str());
    m.outputs = {a.out};
    m.write(manifest_for(a.out));
  }
  return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_epochs;
  bool shared_vocab = false;
};

std::vector<DatasetSample> split_of(const std::vector<DatasetSample>& all, Split s) {
  std::vector<DatasetSample> out;
  for (const auto& x : all) {
    if (x.split == s) out.push_back(x);
  }
  return out;
}

int train_cmd(const TrainArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("train");
  RunConfig rc = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  if (a.seed) rc.train.seed = *a.seed;
  if (a.shared_vocab) rc.data.shared_pseudo_summary_vocab = true;
  if (a.max_epochs) {
    rc.train.max_epochs = *a.max_epochs;
    rc.train.patience = std::min(rc.train.patience, rc.train.max_epochs);
  }
  rc.train.checkpoint_dir = a.out;
  rc.train.validate();
  const auto all = read_dataset(dataset_file(a.data));
  const auto train_set = split_of(all, Split::kTrain);
  const auto valid_set = split_of(all, Split::kValid);
  if (train_set.empty() || valid_set.empty()) {
    throw EmptyDatasetError("training needs non-empty train and valid splits");
  }
  const Vocabularies vocabs = build_vocabularies(train_set, rc.data);
  const ModelConfig cfg = with_vocab_sizes(rc.model, vocabs);
  Model<float> model(cfg, rc.train.seed);
  const auto train_p = prepare_samples(train_set, vocabs, cfg, rc.data.normalize);
  const auto valid_p = prepare_samples(valid_set, vocabs, cfg, rc.data.normalize);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.jsonl");
  RunConfig effective = rc;
  effective.model = cfg;
  TrainHooks hooks;
  hooks.log = &log;
  hooks.on_improve = [&](const Model<float>& mdl, const EpochLog& e) {
    save_checkpoint(
        dir / "best", mdl, vocabs,
        {{"epoch", e.epoch}, {"valid_bleu", e.valid_bleu}, {"train", rc.train.to_json()}});
  };
  const TrainResult result = train_model(model, train_p, valid_p, rc.train, hooks);
  nlohmann::json summary = {
      {"best_epoch", result.best_epoch}, {"best_valid_bleu", result.best_bleu},
      {"epochs", result.history.size()}, {"stopped_early", result.stopped_early},
      {"diverged", result.diverged},     {"parameters", model.parameter_count()}};
  write_text(dir / "train_result.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';

  m.seed = rc.train.seed;
  m.config = effective.to_json();
  if (!a.config.empty()) m.add_input(a.config);
  m.add_input(dataset_file(a.data));
  m.outputs = {(dir / "best").string(), (dir / "train_log.jsonl").string(),
               (dir / "train_result.json").string()};
  m.write(dir / "run_manifest.json");
  return result.diverged ? kExitValidation : kExitOk;
}

// --- eval / summarize --------------------------------------------------------

struct DecodeArgs {
  std::string ckpt, data, split = "test", input, out, manifest;
  std::optional<std::size_t> beam_width;
  std::optional<double> alpha;
  std::size_t threads = 0;
  bool greedy = false;
};

DecodeOptions decode_options(const DecodeArgs& a, const LoadedCheckpoint& ck) {
  DecodeOptions o;
  o.max_len = static_cast<std::size_t>(ck.model.config().max_summary_len) + 1;
  const auto& train =
      ck.manifest.value("extra", nlohmann::json::object()).value("train", nlohmann::json::object());
  o.beam_width = train.value("beam_width", std::size_t{4});
  o.length_alpha = train.value("length_alpha", 0.7);
  if (a.beam_width) o.beam_width = *a.beam_width;
  if (a.alpha) o.length_alpha = *a.alpha;
  if (a.greedy) o.beam_width = 1;
  if (o.beam_width == 0) throw ConfigError("--beam-width must be at least 1");
  return o;
}

int eval_cmd(const DecodeArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("eval");
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const DecodeOptions opts = decode_options(a, ck);
  const Split split = parse_split(a.split);
  const auto samples = split_of(read_dataset(dataset_file(a.data)), split);
  if (samples.empty()) throw EmptyDatasetError("split '" + a.split + "' is empty");
  const auto prepared = prepare_samples(samples, ck.vocabs, ck.model.config());
  const EvalReport report = evaluate(ck.model, prepared, ck.vocabs.summary, opts, a.threads);
  nlohmann::json j = report.to_json();
  j["split"] = a.split;
  j["beam_width"] = opts.beam_width;
  j["length_alpha"] = opts.length_alpha;
  m.config = {
      {"split", a.split}, {"beam_width", opts.beam_width}, {"length_alpha", opts.length_alpha}};
  m.add_input(a.ckpt);
  m.add_input(dataset_file(a.data));
  if (a.out.empty()) {
    out << j.dump(2) << '\n';
    if (!a.manifest.empty()) m.write(a.manifest);
  } else {
    write_text(a.out, j.dump(2) + "\n");
    m.outputs = {a.out};
    m.write(manifest_for(a.out));
  }
  return kExitOk;
}

int summarize_cmd(const DecodeArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("summarize");
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const DecodeOptions opts = decode_options(a, ck);
  std::vector<PreparedSample> prepared;
  for (const auto& f : parse_listing(a.input)) {
    PreparedSample p;
    p.id = f.name;
    p.input = prepare_input(f, function_asm_tokens(f), ck.vocabs, ck.model.config());
    prepared.push_back(std::move(p));
  }
  std::ostringstream buf;
  for (const auto& r : decode_samples(ck.model, prepared, ck.vocabs.summary, opts, a.threads)) {
    std::string line;
    for (const auto& w : r.prediction) line += (line.empty() ? "" : " ") + w;
    buf << line << '\n';
  }
  m.config = {{"beam_width", opts.beam_width}, {"length_alpha", opts.length_alpha}};
  m.add_input(a.ckpt);
  m.add_input(a.input);
  if (a.out.empty()) {
    out << buf.str();
    if (!a.manifest.empty()) m.write(a.manifest);
  } else {
    write_text(a.out, buf.str());
    m.outputs = {a.out};
    m.write(manifest_for(a.out));
  }
  return kExitOk;
}

// --- metrics / stats ---------------------------------------------------------

struct ReportArgs {
  std::string cand, ref, data, format = "json", out, manifest;
  bool no_smoothing = false;
};

void emit(const ReportArgs& a, RunManifest& m, const std::string& text, std::ostream& out) {
  if (a.out.empty()) {
    out << text;
    if (!a.manifest.empty()) m.write(a.manifest);
  } else {
    write_text(a.out, text);
    m.outputs = {a.out};
    m.write(manifest_for(a.out));
  }
}

int metrics_cmd(const ReportArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("metrics");
  const auto cl = read_lines(a.cand);
  const auto rl = read_lines(a.ref);
  if (cl.size() != rl.size()) {
    throw ValidationError("metrics: " + std::to_string(cl.size()) + " candidate lines but " +
                          std::to_string(rl.size()) + " reference lines");
  }
  std::vector<Sentence> cands, refs;
  for (const auto& l : cl) cands.push_back(words(l));
  for (const auto& l : rl) refs.push_back(words(l));
  BleuOptions bo;
  bo.smooth = !a.no_smoothing;
  const MetricReport r = compute_metrics(cands, refs, bo);
  std::ostringstream text;
  if (a.format == "text") {
    text << std::fixed << std::setprecision(2) << "BLEU     " << r.bleu << "\nROUGE-L  "
         << r.rouge_l << "\nMETEOR   " << r.meteor << "\nn        " << r.n << "\n# "
         << metric_notes() << "\n";
  } else {
    nlohmann::json j = report_to_json(r);
    j["bleu_smoothing"] = bo.smooth;
    text << j.dump(2) << '\n';
  }
  m.config = {{"format", a.format}, {"smoothing", bo.smooth}};
  m.add_input(a.cand);
  m.add_input(a.ref);
  emit(a, m, text.str(), out);
  return kExitOk;
}

int stats_cmd(const ReportArgs& a, const Common& common, std::ostream& out) {
  RunManifest m = common.manifest("stats");
  const DatasetStats st = compute_stats(read_dataset(dataset_file(a.data)));
  const std::string text = a.format == "text" ? st.to_text() : st.to_json().dump(2) + "\n";
  m.config = {{"format", a.format}};
  m.add_input(dataset_file(a.data));
  emit(a, m, text, out);
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  return kExitValidation;
}

}  // namespace

namespace {

bool knows_flag(const CLI::App& app, const std::string& name) {
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->check_name(name)) return true;
  }
  for (const CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    if (knows_flag(*sub, name)) return true;
  }
  return false;
}

std::optional<std::string> first_unknown_flag(const CLI::App& app,
                                              const std::vector<std::string>& args) {
  for (const auto& a : args) {
    if (a == "--") break;
    if (a.size() < 2 || a[0] != '-' || std::isdigit(static_cast<unsigned char>(a[1])) ||
        a[1] == '.') {
      continue;
    }
    std::string name = a.substr(0, a.find('='));
    // Bundled short flags such as -o<value> are left to the parser.
    if (name[1] != '-' && name.size() > 2) name = name.substr(0, 2);
    if (!knows_flag(app, name)) return name;
  }
  return std::nullopt;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{
      "Binary code summarization toolkit: datasets, normalization, BI-CFGs, "
      "pseudo-code refinement, training, evaluation and metrics.",
      "bcs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  const CLI::IsMember formats({"json", "text"});

  Common common;
  common.argv = args;

  DatasetMakeArgs dm;
  auto* dataset = app.add_subcommand("dataset", "Build paired datasets");
  dataset->require_subcommand(1);
  auto* make = dataset->add_subcommand("make", "Pair stripped functions with source summaries");
  make->add_option("--stripped", dm.stripped, "Stripped listing (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  make->add_option("--named", dm.named, "Unstripped listing (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  make->add_option("--src", dm.src, "C source root")->required()->check(CLI::ExistingDirectory);
  make->add_option("--arch", dm.arch, "Expected architecture (x86, x64, arm)");
  make->add_option("--opt", dm.opt, "Optimisation level label (O1, O2, O3)");
  make->add_option("--split,--ratios", dm.split, "train,valid,test ratios");
  make->add_option("--seed", dm.seed, "Split seed");
  make->add_flag("--by-project", dm.by_project, "Assign whole projects to one split");
  make->add_flag("--no-split-strings", dm.no_split_strings, "Keep string features whole");
  make->add_option("-o,--out", dm.out, "Output directory")->required();

  NormalizeArgs na;
  auto* normalize = app.add_subcommand("normalize", "Normalise assembly into token streams");
  normalize->add_option("input,--input", na.input, "Listing (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  normalize->add_option("--arch", na.arch, "Expected architecture");
  normalize->add_flag("--no-split-strings", na.no_split_strings, "Keep string features whole");
  normalize->add_option("-o,--out", na.out, "Output JSONL (default stdout)");

  CfgArgs ca;
  auto* cfg = app.add_subcommand("cfg", "Control-flow graphs");
  cfg->require_subcommand(1);
  auto* build = cfg->add_subcommand("build", "Build BI-CFGs for every function of a listing");
  build->add_option("input,--input", ca.input, "Listing (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--arch", ca.arch, "Expected architecture");
  build->add_option("-o,--out", ca.out, "Output graphs JSONL (default stdout)");
  build->add_option("--dot", ca.dot, "Directory for Graphviz renderings");

  RefineArgs ra;
  auto* refine = app.add_subcommand("refine", "Restore identifier names in pseudo code");
  refine->add_option("input,--input", ra.input, "JSONL records with a 'pseudo' field")
      ->required()
      ->check(CLI::ExistingFile);
  refine->add_option("--mode", ra.mode, "passthrough, mapping or remote")
      ->check(CLI::IsMember({"passthrough", "none", "mapping", "remote"}));
  refine->add_option("--mapping,--map", ra.mapping, "Name mapping TSV (mapping mode)");
  refine->add_option("--endpoint", ra.endpoint, "Refiner URL (remote mode)");
  refine->add_option("--timeout-ms", ra.timeout_ms, "Remote request timeout in milliseconds");
  refine->add_option("--timeout", ra.timeout_ms, "Remote request timeout, e.g. 10s or 500ms")
      ->transform(CLI::AsNumberWithUnit(std::map<std::string, int>{{"ms", 1}, {"s", 1000}}));
  refine->add_option("--max-connections", ra.max_connections, "Concurrent remote requests");
  refine->add_option("-o,--out", ra.out, "Output JSONL (default stdout)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", ta.config, "Run config JSON (model/train/data sections)")
      ->check(CLI::ExistingFile);
  train->add_option("--data", ta.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train->add_option("-o,--out", ta.out, "Checkpoint directory")->required();
  train->add_option("--seed", ta.seed, "Overrides train.seed");
  train->add_option("--max-epochs", ta.max_epochs, "Overrides train.max_epochs");
  train->add_flag("--shared-pseudo-summary-vocab", ta.shared_vocab,
                  "One vocabulary for pseudo code and summaries");

  DecodeArgs ea;
  auto* eval = app.add_subcommand("eval", "Decode a split and score it");
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--data", ea.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--split", ea.split, "train, valid or test")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  eval->add_option("-o,--out", ea.out, "Report JSON (default stdout)");
  eval->add_option("--beam-width", ea.beam_width, "Beam width");
  eval->add_option("--alpha", ea.alpha, "Length-normalisation exponent");
  eval->add_flag("--greedy", ea.greedy, "Greedy decoding");
  eval->add_option("--threads", ea.threads, "Decoding threads (0 = all cores)");
  eval->add_option("--manifest", ea.manifest, "Run manifest path when writing to stdout");

  DecodeArgs sa;
  auto* summarize = app.add_subcommand("summarize", "Print one summary per function");
  summarize->add_option("--ckpt", sa.ckpt, "Checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  summarize->add_option("--input", sa.input, "Listing (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  summarize->add_option("-o,--out", sa.out, "Output text (default stdout)");
  summarize->add_option("--beam-width", sa.beam_width, "Beam width");
  summarize->add_option("--alpha", sa.alpha, "Length-normalisation exponent");
  summarize->add_flag("--greedy", sa.greedy, "Greedy decoding");
  summarize->add_option("--threads", sa.threads, "Decoding threads (0 = all cores)");
  summarize->add_option("--manifest", sa.manifest, "Run manifest path when writing to stdout");

  ReportArgs ma;
  auto* metrics = app.add_subcommand("metrics", "BLEU, ROUGE-L and METEOR of line-aligned files");
  metrics->add_option("--cand", ma.cand, "Candidates, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  metrics->add_option("--ref", ma.ref, "References, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  metrics->add_option("--format", ma.format, "json or text")->check(formats);
  metrics->add_flag("--no-smoothing", ma.no_smoothing, "Unsmoothed BLEU");
  metrics->add_option("-o,--out", ma.out, "Output file (default stdout)");
  metrics->add_option("--manifest", ma.manifest, "Run manifest path when writing to stdout");

  ReportArgs st;
  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->add_option("--data", st.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  stats->add_option("--format", st.format, "json or text")->check(formats);
  stats->add_option("-o,--out", st.out, "Output file (default stdout)");
  stats->add_option("--manifest", st.manifest, "Run manifest path when writing to stdout");

  std::vector<std::string> storage = {"bcs"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  // CLI11 reports missing required options before unknown ones; name the
  // unknown flag first so typos are obvious.
  if (const auto bad = first_unknown_flag(app, args)) {
    err << "error: unrecognized option: " << *bad << '\n';
    return kExitConfig;
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << app.help();
    return kExitConfig;
  }

  try {
    if (make->parsed()) return dataset_make(dm, common, out);
    if (normalize->parsed()) return normalize_cmd(na, common, out);
    if (build->parsed()) return cfg_build(ca, common, out);
    if (refine->parsed()) return refine_cmd(ra, common, out, err);
    if (train->parsed()) return train_cmd(ta, common, out);
    if (eval->parsed()) return eval_cmd(ea, common, out);
    if (summarize->parsed()) return summarize_cmd(sa, common, out);
    if (metrics->parsed()) return metrics_cmd(ma, common, out);
    if (stats->parsed()) return stats_cmd(st, common, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  err << app.help();
  return kExitConfig;
}

}  // namespace bcs
