// Copyright 2026 The capadapt Authors.
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

// Command-line front end. Talks to the library only through the C API.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "capadapt/capadapt.h"

namespace {

struct Failure {
  cap_status status;
};

void Check(cap_status s) {
  if (s != CAP_OK) throw Failure{s};
}

// Owns a string returned by the library.
std::string Take(char* s) {
  std::string out = s ? s : "";
  cap_free_string(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<cap_config, Deleter<cap_config, cap_config_free>>;
using CorpusPtr = std::unique_ptr<cap_corpus, Deleter<cap_corpus, cap_corpus_free>>;
using LearnerPtr = std::unique_ptr<cap_learner, Deleter<cap_learner, cap_learner_free>>;
using MemoryPtr = std::unique_ptr<cap_memory, Deleter<cap_memory, cap_memory_free>>;
using ServicePtr = std::unique_ptr<cap_service, Deleter<cap_service, cap_service_free>>;

CorpusPtr LoadCorpus(const std::string& path, const char* split = nullptr) {
  cap_corpus* c = nullptr;
  Check(cap_corpus_load(path.c_str(), split, &c));
  return CorpusPtr(c);
}

// Shared --config / --set handling; flags given on the command line win.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void Attach(CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("-c,--config", path, "Run config file (key = value)");
    if (required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  }

  ConfigPtr Build(const std::vector<std::pair<std::string, std::string>>& extra = {}) const {
    cap_config* c = nullptr;
    if (path.empty()) Check(cap_config_new(&c));
    else Check(cap_config_load(path.c_str(), &c));
    ConfigPtr cfg(c);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
        throw Failure{CAP_ERR_CONFIG};
      }
      Check(cap_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    for (const auto& [k, v] : extra) Check(cap_config_set(cfg.get(), k.c_str(), v.c_str()));
    Check(cap_config_validate(cfg.get()));
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capadapt: continual image-caption adaptation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cap_version()));

  // synth
  auto* synth = app.add_subcommand("synth", "Write a small synthetic dataset and a matching config");
  std::string synth_dir;
  std::uint64_t synth_seed = 1;
  int synth_groups = 5, synth_train = 24, synth_val = 6;
  synth->add_option("--out", synth_dir, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--groups", synth_groups, "Keyword groups (1-5)");
  synth->add_option("--train-per-group", synth_train, "Training images per group");
  synth->add_option("--val-per-group", synth_val, "Validation images per group");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load an annotation file and add it to a corpus file");
  std::string ingest_path, ingest_split = "train", ingest_out = "corpus.json";
  ingest->add_option("--annotations", ingest_path, "COCO-style caption annotations")->required()->check(CLI::ExistingFile);
  ingest->add_option("--split", ingest_split, "Split tag for images without one (train|val|test)");
  ingest->add_option("--out", ingest_out, "Corpus file to create or extend");

  // split
  auto* split = app.add_subcommand("split", "Turn val into test and hold out part of train as val");
  std::string split_in, split_out;
  double split_holdout = 0.2;
  std::uint64_t split_seed = 13;
  split->add_option("--in", split_in, "Corpus file")->required()->check(CLI::ExistingFile);
  split->add_option("--out", split_out, "Output corpus file (defaults to --in)");
  split->add_option("--holdout", split_holdout, "Share of train moved to val");
  split->add_option("--seed", split_seed, "Holdout seed");

  // filter
  auto* filter = app.add_subcommand("filter", "Apply the quality-marker caption filter");
  std::string filter_in = "corpus.json", filter_out, filter_marker;
  filter->add_option("--in", filter_in, "Corpus file")->check(CLI::ExistingFile);
  filter->add_option("--out", filter_out, "Output corpus file (defaults to --in)");
  filter->add_option("--marker", filter_marker, "Marker caption (default: the VizWiz quality string)");

  // stats
  auto* stats = app.add_subcommand("stats", "Per-split image counts and vocabulary size");
  std::string stats_in = "corpus.json";
  stats->add_option("--in", stats_in, "Corpus file")->check(CLI::ExistingFile);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Split and filter the configured target corpus in one step");
  ConfigArgs prepare_cfg;
  prepare_cfg.Attach(prepare, true);
  std::string prepare_out = "corpus.json";
  prepare->add_option("--out", prepare_out, "Output corpus file");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Keyword clustering into tasks");
  std::string cluster_in = "corpus.json", cluster_lexicon, cluster_emb, cluster_out = "clusters.json";
  int cluster_k = 5;
  std::size_t cluster_min_freq = 15;
  std::uint64_t cluster_seed = 7;
  cluster->add_option("--in", cluster_in, "Prepared corpus file")->check(CLI::ExistingFile);
  cluster->add_option("--lexicon", cluster_lexicon, "POS lexicon (word<TAB>TAG)")->required()->check(CLI::ExistingFile);
  cluster->add_option("--embeddings", cluster_emb, "Word embedding table")->required()->check(CLI::ExistingFile);
  cluster->add_option("--k", cluster_k, "Number of clusters");
  cluster->add_option("--min-freq", cluster_min_freq, "Minimum keyword frequency");
  cluster->add_option("--seed", cluster_seed, "k-means++ seed");
  cluster->add_option("--out", cluster_out, "Cluster file to write");

  // tokenize
  auto* tokenize = app.add_subcommand("tokenize", "Show the subword segmentation of a text");
  std::string tok_vocab, tok_text;
  tokenize->add_option("--vocab", tok_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  tokenize->add_option("--text", tok_text, "Text to segment")->required();

  // augment preview
  auto* augment = app.add_subcommand("augment", "Data augmentation tools");
  augment->require_subcommand(1);
  auto* preview = augment->add_subcommand("preview", "Expand one image/caption pair");
  std::string aug_mode = "both", aug_image, aug_caption, aug_thesaurus, aug_out;
  int aug_factor = 10;
  std::uint64_t aug_seed = 1;
  preview->add_option("--mode", aug_mode, "no|img|txt|both");
  preview->add_option("--factor", aug_factor, "Expansion factor");
  preview->add_option("--image", aug_image, "Image file")->required()->check(CLI::ExistingFile);
  preview->add_option("--caption", aug_caption, "Caption text")->required();
  preview->add_option("--seed", aug_seed, "Augmentation seed");
  preview->add_option("--thesaurus", aug_thesaurus, "Thesaurus file")->check(CLI::ExistingFile);
  preview->add_option("--out-dir", aug_out, "Directory for the augmented images");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score generated captions per cluster");
  std::string ev_hyp, ev_refs, ev_clusters, ev_micro = "pooled", ev_format = "csv";
  evaluate->add_option("--hyp", ev_hyp, "Generated captions JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--refs", ev_refs, "Reference annotation file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--clusters", ev_clusters, "Cluster file")->check(CLI::ExistingFile);
  evaluate->add_option("--micro", ev_micro, "pooled|weighted")->check(CLI::IsMember({"pooled", "weighted"}));
  evaluate->add_option("--format", ev_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

  // pretrain / adapt / ablate / report
  auto* pretrain = app.add_subcommand("pretrain", "Two-phase pretraining on the base corpus");
  ConfigArgs pretrain_cfg;
  pretrain_cfg.Attach(pretrain, true);

  auto* adapt = app.add_subcommand("adapt", "Adapt to the clusters in task order");
  ConfigArgs adapt_cfg;
  adapt_cfg.Attach(adapt, true);
  std::string adapt_tasks, adapt_da, adapt_memory;
  adapt->add_option("--tasks", adapt_tasks, "Cluster file")->check(CLI::ExistingFile);
  adapt->add_option("--da", adapt_da, "no|img|txt|both");
  adapt->add_option("--memory", adapt_memory, "on|off")->check(CLI::IsMember({"on", "off"}));

  auto* ablate = app.add_subcommand("ablate", "Memory or data-fraction ablation");
  ConfigArgs ablate_cfg;
  ablate_cfg.Attach(ablate, true);
  std::string ablate_which;
  ablate->add_option("which", ablate_which, "memory|fraction")->required()->check(CLI::IsMember({"memory", "fraction"}));

  auto* report = app.add_subcommand("report", "Print the grids of a run directory");
  std::string report_dir = "run";
  report->add_option("--run-dir", report_dir, "Run directory")->check(CLI::ExistingDirectory);

  // caption
  auto* caption = app.add_subcommand("caption", "Caption an image with a learner snapshot");
  ConfigArgs caption_cfg;
  caption_cfg.Attach(caption, false);
  std::string cap_snapshot, cap_image;
  caption->add_option("--learner", cap_snapshot, "Learner snapshot")->required()->check(CLI::ExistingFile);
  caption->add_option("--image", cap_image, "Image file")->required()->check(CLI::ExistingFile);

  // memory
  auto* memory = app.add_subcommand("memory", "Summarize an episodic memory snapshot");
  std::string mem_path;
  memory->add_option("snapshot", mem_path, "Memory snapshot")->required()->check(CLI::ExistingFile);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the feedback service");
  ConfigArgs serve_cfg;
  serve_cfg.Attach(serve, false);
  std::string serve_dir, serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::size_t serve_auto = 32;
  serve->add_option("--run-dir", serve_dir, "Run directory")->required();
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port (0 picks a free one)");
  serve->add_option("--auto-flush", serve_auto, "Queue length that triggers an update (0 = manual only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      char* out = nullptr;
      Check(cap_synth(synth_dir.c_str(), synth_seed, synth_groups, synth_train, synth_val, &out));
      std::cout << Take(out);
    } else if (*ingest) {
      auto loaded = LoadCorpus(ingest_path, ingest_split.c_str());
      if (std::filesystem::exists(ingest_out)) {
        auto existing = LoadCorpus(ingest_out);
        cap_corpus* merged = nullptr;
        Check(cap_corpus_merge(existing.get(), loaded.get(), &merged));
        loaded.reset(merged);
      }
      Check(cap_corpus_save(loaded.get(), ingest_out.c_str()));
      char* out = nullptr;
      Check(cap_corpus_stats(loaded.get(), &out));
      std::cout << Take(out);
    } else if (*split) {
      auto all = LoadCorpus(split_in);
      cap_corpus *tr = nullptr, *va = nullptr, *merged = nullptr;
      Check(cap_corpus_select(all.get(), "train", &tr));
      CorpusPtr train(tr);
      Check(cap_corpus_select(all.get(), "val", &va));
      CorpusPtr val(va);
      Check(cap_corpus_remap(train.get(), val.get(), split_holdout, split_seed, &merged));
      CorpusPtr result(merged);
      Check(cap_corpus_save(result.get(), (split_out.empty() ? split_in : split_out).c_str()));
      char* out = nullptr;
      Check(cap_corpus_stats(result.get(), &out));
      std::cout << Take(out);
    } else if (*filter) {
      auto in = LoadCorpus(filter_in);
      cap_corpus* res = nullptr;
      char* excluded = nullptr;
      Check(cap_corpus_filter(in.get(), filter_marker.empty() ? nullptr : filter_marker.c_str(), &res, &excluded));
      CorpusPtr out(res);
      Check(cap_corpus_save(out.get(), (filter_out.empty() ? filter_in : filter_out).c_str()));
      std::cout << "{\"kept\": " << cap_corpus_size(out.get()) << ", \"excluded\": " << Take(excluded) << "}\n";
    } else if (*stats) {
      auto in = LoadCorpus(stats_in);
      char* out = nullptr;
      Check(cap_corpus_stats(in.get(), &out));
      std::cout << Take(out);
    } else if (*prepare) {
      auto cfg = prepare_cfg.Build();
      char* out = nullptr;
      Check(cap_prepare_target(cfg.get(), prepare_out.c_str(), &out));
      std::cout << Take(out);
    } else if (*cluster) {
      char* out = nullptr;
      Check(cap_cluster(cluster_in.c_str(), cluster_lexicon.c_str(), cluster_emb.c_str(), cluster_k, cluster_min_freq,
                        cluster_seed, cluster_out.c_str(), &out));
      std::cout << Take(out);
    } else if (*tokenize) {
      char* out = nullptr;
      Check(cap_tokenize(tok_vocab.c_str(), tok_text.c_str(), &out));
      std::cout << Take(out) << "\n";
    } else if (*preview) {
      char* out = nullptr;
      Check(cap_augment_preview(aug_image.c_str(), aug_caption.c_str(), aug_mode.c_str(), aug_factor, aug_seed,
                                aug_thesaurus.empty() ? nullptr : aug_thesaurus.c_str(),
                                aug_out.empty() ? nullptr : aug_out.c_str(), &out));
      std::cout << Take(out);
    } else if (*evaluate) {
      char *json = nullptr, *csv = nullptr;
      Check(cap_evaluate_files(ev_hyp.c_str(), ev_refs.c_str(), ev_clusters.empty() ? nullptr : ev_clusters.c_str(),
                               ev_micro.c_str(), &json, &csv));
      const std::string j = Take(json), c = Take(csv);
      std::cout << (ev_format == "json" ? j : c);
    } else if (*pretrain) {
      auto cfg = pretrain_cfg.Build();
      char* out = nullptr;
      Check(cap_run_pretrain(cfg.get(), &out));
      std::cout << Take(out);
    } else if (*adapt) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (!adapt_tasks.empty()) extra.emplace_back("tasks", adapt_tasks);
      if (!adapt_da.empty()) extra.emplace_back("da.mode", adapt_da);
      if (!adapt_memory.empty()) extra.emplace_back("memory.enabled", adapt_memory);
      auto cfg = adapt_cfg.Build(extra);
      char* out = nullptr;
      Check(cap_run_adapt(cfg.get(), &out));
      std::cout << Take(out);
    } else if (*ablate) {
      auto cfg = ablate_cfg.Build();
      char* out = nullptr;
      Check(cap_run_ablate(cfg.get(), ablate_which.c_str(), &out));
      std::cout << Take(out);
    } else if (*report) {
      char* out = nullptr;
      Check(cap_run_report(report_dir.c_str(), &out));
      std::cout << Take(out);
    } else if (*caption) {
      auto cfg = caption_cfg.Build();
      cap_learner* l = nullptr;
      Check(cap_learner_load(cfg.get(), cap_snapshot.c_str(), &l));
      LearnerPtr learner(l);
      char* out = nullptr;
      Check(cap_learner_caption(learner.get(), cap_image.c_str(), &out));
      std::cout << Take(out) << "\n";
    } else if (*memory) {
      cap_memory* m = nullptr;
      Check(cap_memory_load(mem_path.c_str(), &m));
      MemoryPtr mem(m);
      char* out = nullptr;
      Check(cap_memory_stats(mem.get(), &out));
      std::cout << Take(out);
    } else if (*serve) {
      auto cfg = serve_cfg.Build();
      cap_service* s = nullptr;
      Check(cap_service_new(cfg.get(), serve_dir.c_str(), serve_auto, &s));
      ServicePtr service(s);
      int port = 0;
      Check(cap_service_bind(service.get(), serve_host.c_str(), serve_port, &port));
      std::cout << "listening on http://" << serve_host << ":" << port << std::endl;
      Check(cap_service_run(service.get()));
    }
  } catch (const Failure& f) {
    const char* msg = cap_last_error();
    std::cerr << "error (" << cap_status_name(f.status) << "): " << (msg && *msg ? msg : "failed") << "\n";
    return static_cast<int>(f.status);
  }
  return 0;
}
