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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "bcs/train.hpp"
#include "json.hpp"
#include "support.hpp"

namespace bcs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

CliRun bcs(const std::string& args) {
  const std::string cmd = quote(BCS_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::string data(const std::string& name) { return quote((testing::data_dir() / name).string()); }

std::string make_dataset(const fs::path& out) {
  return "dataset make --stripped " + data("stripped.jsonl") + " --named " + data("named.jsonl") +
         " --src " + data("src") + " --seed 7 -o " + quote(out.string());
}

TEST(Cli, HelpListsEverySubcommand) {
  const CliRun r = bcs("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"dataset", "normalize", "cfg", "refine", "train", "eval", "summarize",
                          "metrics", "stats"}) {
    EXPECT_NE(r.output.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, UnknownFlagExitsTwoAndNamesIt) {
  for (const char* args : {"--frobnicate", "metrics --frobnicate", "dataset make --frobnicate=1"}) {
    const CliRun r = bcs(args);
    EXPECT_EQ(r.code, 2) << args;
    EXPECT_NE(r.output.find("--frobnicate"), std::string::npos) << r.output;
  }
  EXPECT_EQ(bcs("launch").code, 2);
  EXPECT_EQ(bcs("").code, 2);
}

TEST(Cli, MissingInputIsConfigurationError) {
  EXPECT_EQ(bcs("normalize /nonexistent/listing.jsonl").code, 2);
}

TEST(Cli, MalformedListingIsValidationError) {
  const fs::path dir = testing::temp_dir("cli_bad");
  std::ofstream(dir / "bad.jsonl") << "{\"name\": \"f\", \"instructions\": [\n";
  const CliRun r = bcs("normalize " + quote((dir / "bad.jsonl").string()));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST(Cli, DatasetMakeMatchesGoldenPairs) {
  const fs::path out = testing::temp_dir("cli_dataset");
  const CliRun r = bcs(make_dataset(out));
  ASSERT_EQ(r.code, 0) << r.output;
  const json report = json::parse(r.output);
  EXPECT_EQ(report["paired"], 10);
  EXPECT_EQ(report["no_summary"], 1);
  EXPECT_EQ(report["stripped_without_named"], 1);

  std::map<std::string, std::string> golden;
  std::ifstream g(testing::data_dir() / "golden_pairs.tsv");
  std::string line;
  while (std::getline(g, line)) {
    const auto tab = line.find('\t');
    golden[line.substr(0, tab)] = line.substr(tab + 1);
  }
  std::map<std::string, std::string> got;
  std::map<std::string, int> splits;
  for (const auto& rec : read_jsonl(out / "dataset.jsonl")) {
    std::string summary;
    for (const auto& w : rec["summary"])
      summary += (summary.empty() ? "" : " ") + w.get<std::string>();
    got[rec["name"]] = summary;
    ++splits[rec["split"]];
  }
  EXPECT_EQ(got, golden);
  EXPECT_EQ(got["gss_del_sec_context"], "free all resources associated with context_handle");
  EXPECT_EQ(splits["train"], 8);
  EXPECT_EQ(splits["valid"], 1);
  EXPECT_EQ(splits["test"], 1);

  const json manifest = json::parse(slurp(out / "run_manifest.json"));
  EXPECT_EQ(manifest["command"], "dataset make");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["inputs"].size(), 3u);  // two listings and the source tree

  // Same inputs and seed give the same dataset.
  const fs::path again = testing::temp_dir("cli_dataset_again");
  ASSERT_EQ(bcs(make_dataset(again)).code, 0);
  EXPECT_EQ(slurp(out / "dataset.jsonl"), slurp(again / "dataset.jsonl"));
}

TEST(Cli, StatsReportsTableSchema) {
  const fs::path out = testing::temp_dir("cli_stats");
  ASSERT_EQ(bcs(make_dataset(out)).code, 0);
  const CliRun r = bcs("stats --data " + quote(out.string()));
  ASSERT_EQ(r.code, 0) << r.output;
  const json j = json::parse(r.output);
  EXPECT_EQ(j["functions"], 10);
  EXPECT_NEAR(j["summary"]["avg_tokens"].get<double>(), 7.7, 1e-9);
  EXPECT_NEAR(j["bicfg"]["avg_nodes"].get<double>(), 8.6, 1e-9);
  EXPECT_EQ(bcs("stats --data " + quote(out.string()) + " --format text").code, 0);
}

TEST(Cli, NormalizeAcceptsPositionalOrFlag) {
  const CliRun a = bcs("normalize " + data("stripped.jsonl"));
  const CliRun b = bcs("normalize --input " + data("stripped.jsonl"));
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_EQ(a.output, b.output);
  std::istringstream lines(a.output);
  std::string first;
  std::getline(lines, first);
  const json j = json::parse(first);
  EXPECT_EQ(j["name"], "sub_401000");
  EXPECT_EQ(j["unparsed"], 0);
}

TEST(Cli, CfgBuildWritesGraphs) {
  const fs::path out = testing::temp_dir("cli_cfg") / "graphs.jsonl";
  const CliRun r = bcs("cfg build " + data("stripped.jsonl") + " -o " + quote(out.string()));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto graphs = read_jsonl(out);
  EXPECT_EQ(graphs.size(), 12u);
  EXPECT_TRUE(fs::exists(out.string() + ".manifest.json"));
}

TEST(Cli, RefineMappingMode) {
  const fs::path dir = testing::temp_dir("cli_refine");
  std::ofstream(dir / "in.jsonl")
      << json{{"id", "f"}, {"pseudo", slurp(testing::data_dir() / "refine_sample.c")}}.dump()
      << '\n';
  const CliRun r = bcs("refine " + quote((dir / "in.jsonl").string()) + " --mode mapping --map " +
                       data("names.tsv") + " -o " + quote((dir / "out.jsonl").string()));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto recs = read_jsonl(dir / "out.jsonl");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0]["pseudo"], slurp(testing::data_dir() / "refine_expected.c"));
}

TEST(Cli, RefineRemoteFallsBackWhenUnreachable) {
  const fs::path dir = testing::temp_dir("cli_refine_remote");
  const std::string text = slurp(testing::data_dir() / "refine_sample.c");
  std::ofstream(dir / "in.jsonl") << json{{"id", "f"}, {"pseudo", text}}.dump() << '\n';
  const CliRun r = bcs("refine " + quote((dir / "in.jsonl").string()) +
                       " --mode remote --endpoint http://127.0.0.1:1/refine --timeout 200ms -o " +
                       quote((dir / "out.jsonl").string()));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_jsonl(dir / "out.jsonl")[0]["pseudo"], text);
}

TEST(Cli, MetricsOnLineAlignedFiles) {
  const fs::path dir = testing::temp_dir("cli_metrics");
  std::ofstream(dir / "c.txt") << "free all resources\nb a\n";
  std::ofstream(dir / "r.txt") << "free all resources\na b\n";
  const CliRun r = bcs("metrics --cand " + quote((dir / "c.txt").string()) + " --ref " +
                       quote((dir / "r.txt").string()));
  ASSERT_EQ(r.code, 0) << r.output;
  const json j = json::parse(r.output);
  EXPECT_EQ(j["n"], 2);
  // (1 - 0.5/27) for the identical pair, 0.5 for the swapped one.
  EXPECT_NEAR(j["meteor"].get<double>(), 100.0 * ((1.0 - 0.5 / 27.0) + 0.5) / 2.0, 1e-9);
  std::ofstream(dir / "short.txt") << "a\n";
  EXPECT_EQ(bcs("metrics --cand " + quote((dir / "short.txt").string()) + " --ref " +
                quote((dir / "r.txt").string()))
                .code,
            1);
}

TEST(Cli, TrainEvalSummarizeRoundTrip) {
  const fs::path root = testing::temp_dir("cli_train");
  ASSERT_EQ(bcs(make_dataset(root / "data")).code, 0);
  RunConfig rc;
  rc.model = ModelConfig::micro();
  rc.train.batch_size = 4;
  rc.train.max_epochs = 2;
  rc.train.patience = 2;
  rc.train.lr = 1e-3;
  std::ofstream(root / "config.json") << rc.to_json().dump(2);
  const std::string ckpt = quote((root / "ckpt" / "best").string());
  CliRun r =
      bcs("train --config " + quote((root / "config.json").string()) + " --data " +
          quote((root / "data").string()) + " -o " + quote((root / "ckpt").string()) + " --seed 3");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(root / "ckpt" / "run_manifest.json"));

  r = bcs("eval --ckpt " + ckpt + " --data " + quote((root / "data").string()) +
          " --split test --threads 1");
  ASSERT_EQ(r.code, 0) << r.output;
  const json report = json::parse(r.output);
  EXPECT_EQ(report["n"], 1);
  EXPECT_EQ(report["per_sample"].size(), 1u);

  r = bcs("summarize --ckpt " + ckpt + " --input " + data("stripped.jsonl") + " --greedy");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 12);
}

}  // namespace
}  // namespace bcs
