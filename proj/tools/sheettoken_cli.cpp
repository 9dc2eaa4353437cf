// Copyright (c) 2026 The SheetToken Authors. All Rights Reserved.
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
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sheettoken/sheettoken.h"

namespace {

struct Failure {
  st_status status;
};

void Check(st_status s) {
  if (s != ST_OK) throw Failure{s};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Corpus = std::unique_ptr<st_corpus, Deleter<st_corpus, st_corpus_free>>;
using Encoder = std::unique_ptr<st_encoder, Deleter<st_encoder, st_encoder_free>>;
using Tokens = std::unique_ptr<st_tokens, Deleter<st_tokens, st_tokens_free>>;
using Retriever = std::unique_ptr<st_retriever, Deleter<st_retriever, st_retriever_free>>;
using CString = std::unique_ptr<char, Deleter<char, st_string_free>>;

std::string Take(char* s) { return CString(s).get(); }

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

Corpus LoadCorpus(const std::string& dir) {
  st_corpus* c = nullptr;
  Check(st_corpus_load(dir.c_str(), &c));
  return Corpus(c);
}

Encoder LoadEncoder(const std::string& path) {
  st_encoder* e = nullptr;
  Check(st_encoder_load(path.c_str(), &e));
  return Encoder(e);
}

Tokens LoadTokens(const std::string& path) {
  st_tokens* t = nullptr;
  Check(st_tokens_load(path.c_str(), &t));
  return Tokens(t);
}

Retriever LoadRetriever(const std::string& path) {
  st_retriever* r = nullptr;
  Check(st_retriever_load(path.c_str(), &r));
  return Retriever(r);
}

std::vector<std::uint64_t> ParseSeeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(item, &used);
    if (used != item.size()) throw CLI::ValidationError("--seeds", "not an integer: " + item);
    seeds.push_back(v);
  }
  if (seeds.empty()) throw CLI::ValidationError("--seeds", "empty seed list");
  return seeds;
}

struct Options {
  std::string config_file;
  std::string config_text;
  std::string templates, out, corpus, model, tokens, encoder, retriever, import_csv, text, log, mode = "enhanced";
  std::string seeds = "1,2,3,4,5";
  std::uint64_t seed = 42;
  std::size_t pairs = 0, topk = 0;
  int neg_ratio = 5;
  double p_string = 0.20, threshold = 0.5;
  int stage = 1;
  unsigned threads = 1;
  bool json = false, check = false;
};

const char* Config(Options& o) {
  if (!o.config_file.empty() && o.config_text.empty()) o.config_text = ReadText(o.config_file);
  return o.config_text.empty() ? nullptr : o.config_text.c_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sheet Token encoder and graph retriever"};
  app.require_subcommand(1);
  app.set_version_flag("--version", st_version());
  Options o;

  auto* fab = app.add_subcommand("fabricate", "fabricate a training corpus from table templates");
  fab->add_option("--templates", o.templates, "directory of CSV templates (bundled generator if omitted)")
      ->check(CLI::ExistingDirectory);
  fab->add_option("--out", o.out, "output corpus directory")->required();
  fab->add_option("--seed", o.seed, "random seed");
  fab->add_option("--pairs", o.pairs, "number of positive pairs (templates)");
  auto* neg_opt = fab->add_option("--neg-ratio", o.neg_ratio, "negatives per positive")->check(CLI::PositiveNumber);
  auto* ps_opt = fab->add_option("--p-string", o.p_string, "string noise rate")->check(CLI::Range(0.0, 1.0));
  fab->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);

  auto* tenc = app.add_subcommand("train-encoder", "train the Stage 1 sheet encoder");
  tenc->add_option("--corpus", o.corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  tenc->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  tenc->add_option("--out", o.out, "model file")->required();
  tenc->add_option("--seed", o.seed, "random seed");
  tenc->add_option("--log", o.log, "training log CSV (default: <out>.log.csv)");

  auto* enc = app.add_subcommand("encode", "write the Sheet Token cache of a corpus");
  enc->add_option("--corpus", o.corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  auto* model_opt = enc->add_option("--model", o.model, "encoder model file")->check(CLI::ExistingFile);
  auto* import_opt =
      enc->add_option("--import", o.import_csv, "CSV of external embeddings (sheet_id,v1,...,vd)")
          ->check(CLI::ExistingFile);
  model_opt->excludes(import_opt);
  enc->add_option("--out", o.out, "token cache file")->required();
  enc->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* tret = app.add_subcommand("train-retriever", "train the Stage 2 graph retriever");
  tret->add_option("--corpus", o.corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  tret->add_option("--tokens", o.tokens, "token cache")->required()->check(CLI::ExistingFile);
  tret->add_option("--encoder", o.encoder, "encoder model used for query vectors")
      ->required()
      ->check(CLI::ExistingFile);
  tret->add_option("--mode", o.mode, "enhanced or baseline")->check(CLI::IsMember({"enhanced", "baseline"}));
  tret->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  tret->add_option("--out", o.out, "retriever model file")->required();
  tret->add_option("--seed", o.seed, "random seed");
  tret->add_option("--log", o.log, "training log CSV (default: <out>.log.csv)");

  auto* qry = app.add_subcommand("query", "rank corpus sheets for a natural-language query");
  qry->add_option("--text", o.text, "query text")->required();
  qry->add_option("--corpus", o.corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  qry->add_option("--tokens", o.tokens, "token cache")->required()->check(CLI::ExistingFile);
  qry->add_option("--encoder", o.encoder, "encoder model")->required()->check(CLI::ExistingFile);
  qry->add_option("--retriever", o.retriever, "retriever model")->required()->check(CLI::ExistingFile);
  auto* topk_opt = qry->add_option("--topk", o.topk, "select the top K sheets")->check(CLI::PositiveNumber);
  auto* thr_opt = qry->add_option("--threshold", o.threshold, "select sheets scoring at least this")
                      ->check(CLI::Range(0.0, 1.0));
  topk_opt->excludes(thr_opt);
  qry->add_flag("--json", o.json, "print a JSON array");

  auto* ev = app.add_subcommand("eval", "print train and eval metrics");
  ev->add_option("--stage", o.stage, "1 (encoder) or 2 (retriever)")->required()->check(CLI::IsMember({1, 2}));
  ev->add_option("--corpus", o.corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--encoder,--model", o.encoder, "encoder model")->required()->check(CLI::ExistingFile);
  ev->add_option("--tokens", o.tokens, "token cache (stage 2)")->check(CLI::ExistingFile);
  ev->add_option("--retriever", o.retriever, "retriever model (stage 2)")->check(CLI::ExistingFile);
  ev->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* abl = app.add_subcommand("ablate", "train and evaluate the three ablation variants");
  abl->add_option("--corpus", o.corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  abl->add_option("--seeds", o.seeds, "comma-separated seeds");
  abl->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  abl->add_option("--out", o.out, "report directory")->required();
  abl->add_flag("--check", o.check, "exit nonzero when the ordering check fails");

  auto* flo = app.add_subcommand("flops", "estimate forward-pass FLOPs");
  flo->add_option("--corpus", o.corpus, "measure feature counts from this corpus")
      ->check(CLI::ExistingDirectory);
  flo->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  flo->add_flag("--json", o.json, "print JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fab->parsed()) {
      nlohmann::json cfg = nlohmann::json::object();
      if (Config(o)) cfg = nlohmann::json::parse(o.config_text);
      if (neg_opt->count()) cfg["fabricate"]["neg_ratio"] = o.neg_ratio;
      if (ps_opt->count()) cfg["fabricate"]["p_string"] = o.p_string;
      const std::string text = cfg.dump();
      char* stats = nullptr;
      Check(st_fabricate(o.templates.empty() ? nullptr : o.templates.c_str(), o.out.c_str(), o.seed, o.pairs,
                         text.c_str(), &stats));
      std::cout << Take(stats) << "\n";
    } else if (tenc->parsed()) {
      const Corpus corpus = LoadCorpus(o.corpus);
      st_encoder* raw = nullptr;
      char* log = nullptr;
      Check(st_encoder_train(corpus.get(), Config(o), o.seed, &raw, &log));
      const Encoder model(raw);
      const std::string csv = Take(log);
      Check(st_encoder_save(model.get(), o.out.c_str()));
      WriteText(o.log.empty() ? o.out + ".log.csv" : o.log, csv);
      std::cout << csv;
    } else if (enc->parsed()) {
      if (o.model.empty() == o.import_csv.empty()) throw CLI::ValidationError("encode", "need --model or --import");
      const Corpus corpus = LoadCorpus(o.corpus);
      st_tokens* raw = nullptr;
      if (!o.model.empty()) {
        const Encoder model = LoadEncoder(o.model);
        Check(st_tokens_encode(model.get(), corpus.get(), o.threads, &raw));
      } else {
        Check(st_tokens_import(o.import_csv.c_str(), corpus.get(), &raw));
      }
      const Tokens tokens(raw);
      Check(st_tokens_save(tokens.get(), o.out.c_str()));
      std::cout << "wrote " << st_tokens_count(tokens.get()) << " tokens of dimension " << st_tokens_dim(tokens.get())
                << " to " << o.out << "\n";
    } else if (tret->parsed()) {
      const Corpus corpus = LoadCorpus(o.corpus);
      const Tokens tokens = LoadTokens(o.tokens);
      const Encoder encoder = LoadEncoder(o.encoder);
      st_retriever* raw = nullptr;
      char* log = nullptr;
      Check(st_retriever_train(corpus.get(), tokens.get(), encoder.get(), Config(o),
                               o.mode == "baseline" ? ST_MODE_BASELINE : ST_MODE_ENHANCED, o.seed, &raw, &log));
      const Retriever model(raw);
      const std::string csv = Take(log);
      Check(st_retriever_save(model.get(), o.out.c_str()));
      WriteText(o.log.empty() ? o.out + ".log.csv" : o.log, csv);
      std::cout << csv;
    } else if (qry->parsed()) {
      const Corpus corpus = LoadCorpus(o.corpus);
      const Tokens tokens = LoadTokens(o.tokens);
      const Encoder encoder = LoadEncoder(o.encoder);
      const Retriever retriever = LoadRetriever(o.retriever);
      st_hit* hits = nullptr;
      std::size_t n = 0;
      Check(st_query(corpus.get(), tokens.get(), encoder.get(), retriever.get(), o.text.c_str(), o.threshold, o.topk,
                     &hits, &n));
      const std::unique_ptr<st_hit, Deleter<st_hit, st_hits_free>> guard(hits);
      if (o.json) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < n; ++i)
          out.push_back({{"sheet_id", hits[i].sheet_id}, {"score", hits[i].score}, {"selected", hits[i].selected != 0}});
        std::cout << out.dump(2) << "\n";
      } else {
        std::printf("%-5s %-9s %-9s %s\n", "rank", "sheet_id", "score", "selected");
        for (std::size_t i = 0; i < n; ++i)
          std::printf("%-5zu %-9u %-9.4f %s\n", i + 1, hits[i].sheet_id, hits[i].score, hits[i].selected ? "*" : "");
      }
    } else if (ev->parsed()) {
      const Corpus corpus = LoadCorpus(o.corpus);
      const Encoder encoder = LoadEncoder(o.encoder);
      char* table = nullptr;
      if (o.stage == 1) {
        Check(st_eval_stage1(corpus.get(), encoder.get(), &table));
      } else {
        if (o.tokens.empty() || o.retriever.empty())
          throw CLI::ValidationError("eval", "stage 2 needs --tokens and --retriever");
        const Tokens tokens = LoadTokens(o.tokens);
        const Retriever retriever = LoadRetriever(o.retriever);
        Check(st_eval_stage2(corpus.get(), tokens.get(), encoder.get(), retriever.get(), o.threads, &table));
      }
      std::cout << Take(table);
    } else if (abl->parsed()) {
      const std::vector<std::uint64_t> seeds = ParseSeeds(o.seeds);
      const Corpus corpus = LoadCorpus(o.corpus);
      char *csv = nullptr, *json = nullptr;
      int passes = 0;
      auto progress = [](const char* msg, void*) { std::cerr << msg << std::endl; };
      Check(st_ablate(corpus.get(), seeds.data(), seeds.size(), Config(o), progress, nullptr, &csv, &json, &passes));
      const std::string csv_text = Take(csv), json_text = Take(json);
      std::filesystem::create_directories(o.out);
      WriteText((std::filesystem::path(o.out) / "report.csv").string(), csv_text);
      WriteText((std::filesystem::path(o.out) / "report.json").string(), json_text);
      std::cout << csv_text << "ordering check: " << (passes ? "pass" : "fail") << "\n";
      if (o.check && !passes) return 3;
    } else if (flo->parsed()) {
      Corpus corpus;
      if (!o.corpus.empty()) corpus = LoadCorpus(o.corpus);
      char *table = nullptr, *json = nullptr;
      Check(st_flops(corpus.get(), Config(o), &table, &json));
      const std::string t = Take(table), j = Take(json);
      std::cout << (o.json ? j : t);
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << st_status_name(f.status) << "): " << st_last_error() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
