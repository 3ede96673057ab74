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

#include "capadapt/capadapt.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "augment.hpp"
#include "common.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "image.hpp"
#include "json.hpp"
#include "learner.hpp"
#include "memory.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "service.hpp"
#include "synth.hpp"
#include "tokenizer.hpp"

struct cap_config {
  capadapt::RunConfig value;
};
struct cap_corpus {
  capadapt::Corpus value;
};
struct cap_learner {
  std::unique_ptr<capadapt::Learner> value;
};
struct cap_memory {
  capadapt::EpisodicMemory value;
};
struct cap_service {
  std::unique_ptr<capadapt::FeedbackService> service;
  std::unique_ptr<capadapt::ServiceServer> server;
};

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

thread_local std::string g_last_error;

cap_status Fail(cap_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
cap_status Guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CAP_OK;
  } catch (const capadapt::Error& e) {
    return Fail(static_cast<cap_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return Fail(CAP_ERR_PARSE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(CAP_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(CAP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(CAP_ERR_INTERNAL, e.what());
  }
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void Put(char** out, const std::string& s) {
  if (out) *out = Dup(s);
}

template <typename T>
const T& Need(const T* p, const char* what) {
  if (!p) throw capadapt::InvalidArgument(std::string(what) + " must not be NULL");
  return *p;
}

const char* NeedStr(const char* s, const char* what) {
  if (!s) throw capadapt::InvalidArgument(std::string(what) + " must not be NULL");
  return s;
}

void NeedOut(const void* out) {
  if (!out) throw capadapt::InvalidArgument("output pointer must not be NULL");
}

cap_status EvaluateClusters(const std::vector<capadapt::ClusterPairs>& clusters, const char* micro,
                            char** report_json, char** report_csv) {
  const std::string m = micro ? micro : "pooled";
  if (m != "pooled" && m != "weighted") throw capadapt::InvalidArgument("micro must be pooled or weighted");
  if (clusters.empty()) throw capadapt::InvalidArgument("nothing to evaluate");
  const auto report = capadapt::Evaluate(
      clusters, m == "pooled" ? capadapt::MicroMode::kPooled : capadapt::MicroMode::kItemWeighted);
  Put(report_json, capadapt::ReportToJson(report));
  Put(report_csv, capadapt::ReportToCsv(report));
  return CAP_OK;
}

}  // namespace

extern "C" {

const char* cap_version(void) { return "0.1.0"; }

const char* cap_last_error(void) { return g_last_error.c_str(); }

const char* cap_status_name(cap_status status) {
  switch (status) {
    case CAP_OK: return "ok";
    case CAP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CAP_ERR_PARSE: return "parse";
    case CAP_ERR_INTEGRITY: return "integrity";
    case CAP_ERR_IO: return "io";
    case CAP_ERR_CONFIG: return "config";
    case CAP_ERR_STATE: return "state";
    case CAP_ERR_NOT_FOUND: return "not_found";
    case CAP_ERR_BUSY: return "busy";
    case CAP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void cap_free_string(char* s) { std::free(s); }

cap_status cap_config_new(cap_config** out) {
  return Guard([&] {
    NeedOut(out);
    *out = new cap_config{};
  });
}

cap_status cap_config_load(const char* path, cap_config** out) {
  return Guard([&] {
    NeedOut(out);
    auto cfg = std::make_unique<cap_config>(cap_config{capadapt::RunConfig::Load(NeedStr(path, "path"))});
    *out = cfg.release();
  });
}

cap_status cap_config_set(cap_config* config, const char* key, const char* value) {
  return Guard([&] {
    Need(config, "config");
    config->value.Set(NeedStr(key, "key"), NeedStr(value, "value"));
  });
}

cap_status cap_config_get(const cap_config* config, const char* key, char** value) {
  return Guard([&] {
    NeedOut(value);
    const auto m = Need(config, "config").value.ToMap();
    auto it = m.find(NeedStr(key, "key"));
    if (it == m.end()) throw capadapt::ConfigError(std::string("unknown config key '") + key + "'");
    Put(value, it->second);
  });
}

cap_status cap_config_serialize(const cap_config* config, char** text) {
  return Guard([&] {
    NeedOut(text);
    Put(text, Need(config, "config").value.Serialize());
  });
}

cap_status cap_config_validate(const cap_config* config) {
  return Guard([&] { Need(config, "config").value.Validate(); });
}

void cap_config_free(cap_config* config) { delete config; }

cap_status cap_corpus_load(const char* path, const char* split, cap_corpus** out) {
  return Guard([&] {
    NeedOut(out);
    const auto s = capadapt::ParseSplit(split ? split : "train");
    *out = new cap_corpus{capadapt::LoadCorpus(NeedStr(path, "path"), s)};
  });
}

cap_status cap_corpus_remap(const cap_corpus* train, const cap_corpus* val, double holdout_fraction, uint64_t seed,
                            cap_corpus** out) {
  return Guard([&] {
    NeedOut(out);
    const auto parts = capadapt::RemapSplits(Need(train, "train").value, Need(val, "val").value, holdout_fraction, seed);
    *out = new cap_corpus{capadapt::MergeCorpora({&parts.train, &parts.val, &parts.test})};
  });
}

cap_status cap_corpus_filter(const cap_corpus* corpus, const char* marker, cap_corpus** out, char** excluded_json) {
  return Guard([&] {
    NeedOut(out);
    auto r = capadapt::ApplyQualityFilter(Need(corpus, "corpus").value,
                                          marker ? std::string_view(marker) : capadapt::kQualityMarker);
    const std::string excluded = json(r.excluded_ids).dump();
    auto result = std::make_unique<cap_corpus>(cap_corpus{std::move(r.corpus)});
    Put(excluded_json, excluded);
    *out = result.release();
  });
}

cap_status cap_corpus_save(const cap_corpus* corpus, const char* path) {
  return Guard([&] { capadapt::SaveCorpus(Need(corpus, "corpus").value, NeedStr(path, "path")); });
}

cap_status cap_corpus_stats(const cap_corpus* corpus, char** stats_json) {
  return Guard([&] {
    NeedOut(stats_json);
    Put(stats_json, capadapt::StatsToJson(capadapt::ComputeStats(Need(corpus, "corpus").value)));
  });
}

cap_status cap_corpus_merge(const cap_corpus* a, const cap_corpus* b, cap_corpus** out) {
  return Guard([&] {
    NeedOut(out);
    *out = new cap_corpus{capadapt::MergeCorpora({&Need(a, "a").value, &Need(b, "b").value})};
  });
}

cap_status cap_corpus_select(const cap_corpus* corpus, const char* split, cap_corpus** out) {
  return Guard([&] {
    NeedOut(out);
    const auto s = capadapt::ParseSplit(NeedStr(split, "split"));
    std::vector<capadapt::ImageRecord> images;
    for (const auto& rec : Need(corpus, "corpus").value.images())
      if (rec.split == s) images.push_back(rec);
    *out = new cap_corpus{capadapt::Corpus(std::move(images))};
  });
}

size_t cap_corpus_size(const cap_corpus* corpus) { return corpus ? corpus->value.size() : 0; }

void cap_corpus_free(cap_corpus* corpus) { delete corpus; }

cap_status cap_prepare_target(const cap_config* config, const char* out_path, char** summary_json) {
  return Guard([&] {
    const auto target = capadapt::PrepareTarget(Need(config, "config").value);
    capadapt::SaveCorpus(target.corpus, NeedStr(out_path, "out_path"));
    json summary = json::parse(capadapt::StatsToJson(capadapt::ComputeStats(target.corpus)));
    summary["excluded_ids"] = target.excluded_ids;
    Put(summary_json, summary.dump(1) + "\n");
  });
}

cap_status cap_cluster(const char* corpus_path, const char* lexicon_path, const char* embeddings_path, int k,
                       size_t min_freq, uint64_t seed, const char* out_path, char** table_json) {
  return Guard([&] {
    capadapt::ClusterOptions opts;
    opts.k = k;
    opts.min_freq = min_freq;
    opts.seed = seed;
    Put(table_json, capadapt::RunClustering(NeedStr(corpus_path, "corpus_path"), NeedStr(lexicon_path, "lexicon_path"),
                                            NeedStr(embeddings_path, "embeddings_path"), opts,
                                            NeedStr(out_path, "out_path")));
  });
}

cap_status cap_tokenize(const char* vocab_path, const char* text, char** result_json) {
  return Guard([&] {
    NeedOut(result_json);
    const auto vocab = capadapt::SubwordVocab::Load(NeedStr(vocab_path, "vocab_path"));
    const auto ids = capadapt::Tokenize(NeedStr(text, "text"), vocab);
    json pieces = json::array();
    for (int id : ids) pieces.push_back(vocab.Token(id));
    json doc = {{"words", capadapt::PreTokenize(text)}, {"ids", ids}, {"pieces", pieces}};
    Put(result_json, doc.dump());
  });
}

cap_status cap_augment_preview(const char* image_path, const char* caption, const char* mode, int factor,
                               uint64_t seed, const char* thesaurus_path, const char* out_dir, char** result_json) {
  return Guard([&] {
    NeedOut(result_json);
    capadapt::AugmentConfig cfg;
    cfg.mode = capadapt::ParseAugmentMode(NeedStr(mode, "mode"));
    cfg.factor = factor;
    cfg.seed = seed;
    capadapt::Sample sample;
    sample.image_id = fs::path(NeedStr(image_path, "image_path")).filename().string();
    sample.image = std::make_shared<const capadapt::ImageBuffer>(capadapt::LoadImageFile(image_path));
    sample.caption = capadapt::WordTokens(NeedStr(caption, "caption"));
    std::shared_ptr<const capadapt::Thesaurus> thesaurus;
    if (thesaurus_path)
      thesaurus = std::make_shared<const capadapt::Thesaurus>(capadapt::Thesaurus::Load(thesaurus_path));
    capadapt::ParaphrasePool pool({std::make_shared<capadapt::OfflineParaphraser>(thesaurus)});
    const auto expanded = capadapt::ExpandBatch(std::span(&sample, 1), cfg, &pool);
    json copies = json::array();
    if (out_dir) fs::create_directories(out_dir);
    for (const auto& s : expanded) {
      json c = {{"copy_index", s.copy_index}, {"caption", capadapt::Join(s.caption, " ")},
                {"image_changed", s.image != sample.image}};
      if (out_dir) {
        const auto file = (fs::path(out_dir) / ("copy_" + std::to_string(s.copy_index) + ".png")).string();
        capadapt::SaveImageFile(*s.image, file);
        c["file"] = file;
      }
      copies.push_back(std::move(c));
    }
    Put(result_json, json{{"mode", capadapt::AugmentModeName(cfg.mode)}, {"factor", factor}, {"copies", copies}}.dump(1) + "\n");
  });
}

cap_status cap_evaluate(const char* input_json, const char* micro, char** report_json, char** report_csv) {
  return Guard([&] {
    const auto doc = json::parse(NeedStr(input_json, "input_json"));
    std::vector<capadapt::ClusterPairs> clusters;
    for (const auto& [label, items] : doc.at("clusters").items()) {
      capadapt::ClusterPairs cp{label, {}};
      for (const auto& it : items)
        cp.pairs.push_back(capadapt::MakeEvalPair(it.value("image_id", ""), it.at("hypothesis").get<std::string>(),
                                                  it.at("references").get<std::vector<std::string>>()));
      clusters.push_back(std::move(cp));
    }
    EvaluateClusters(clusters, micro, report_json, report_csv);
  });
}

cap_status cap_evaluate_files(const char* hyp_path, const char* refs_path, const char* clusters_path,
                              const char* micro, char** report_json, char** report_csv) {
  return Guard([&] {
    const auto hyp_doc = json::parse(capadapt::ReadFile(NeedStr(hyp_path, "hyp_path")));
    std::map<std::string, std::string> hyps;
    if (hyp_doc.is_object()) {
      for (const auto& [id, cap] : hyp_doc.items()) hyps[id] = cap.get<std::string>();
    } else {
      for (const auto& it : hyp_doc) {
        const auto& id = it.at("image_id");
        hyps[id.is_string() ? id.get<std::string>() : id.dump()] = it.at("caption").get<std::string>();
      }
    }
    const auto refs = capadapt::LoadCorpus(NeedStr(refs_path, "refs_path"), capadapt::Split::kTest);
    auto pair_of = [&](const std::string& id) {
      const auto* rec = refs.Find(id);
      if (!rec) throw capadapt::IntegrityError("hypothesis for unknown image id " + id);
      std::vector<std::string> texts;
      for (const auto& c : rec->captions) texts.push_back(c.text);
      return capadapt::MakeEvalPair(id, hyps.at(id), texts);
    };
    std::vector<capadapt::ClusterPairs> clusters;
    if (clusters_path) {
      for (const auto& entry : capadapt::LoadClusterFile(clusters_path).clusters) {
        capadapt::ClusterPairs cp{std::to_string(entry.cluster_id), {}};
        for (const auto& [split, ids] : entry.image_ids)
          for (const auto& id : ids)
            if (hyps.count(id)) cp.pairs.push_back(pair_of(id));
        if (!cp.pairs.empty()) clusters.push_back(std::move(cp));
      }
    } else {
      capadapt::ClusterPairs cp{"corpus", {}};
      for (const auto& [id, _] : hyps) cp.pairs.push_back(pair_of(id));
      clusters.push_back(std::move(cp));
    }
    EvaluateClusters(clusters, micro, report_json, report_csv);
  });
}

cap_status cap_learner_new(const cap_config* config, cap_learner** out) {
  return Guard([&] {
    NeedOut(out);
    *out = new cap_learner{capadapt::MakeLearner(Need(config, "config").value.learner)};
  });
}

cap_status cap_learner_load(const cap_config* config, const char* snapshot_path, cap_learner** out) {
  return Guard([&] {
    NeedOut(out);
    *out = new cap_learner{capadapt::LoadLearner(Need(config, "config").value, NeedStr(snapshot_path, "snapshot_path"))};
  });
}

cap_status cap_learner_observe(cap_learner* learner, const char* image_path, const char* caption) {
  return Guard([&] {
    auto& l = *Need(learner, "learner").value;
    const auto img = capadapt::LoadImageFile(NeedStr(image_path, "image_path"));
    const capadapt::Observation ob{l.Extract(img), capadapt::WordTokens(NeedStr(caption, "caption"))};
    l.ObserveBatch(std::span(&ob, 1));
  });
}

cap_status cap_learner_caption(const cap_learner* learner, const char* image_path, char** caption) {
  return Guard([&] {
    NeedOut(caption);
    const auto& l = *Need(learner, "learner").value;
    const auto img = capadapt::LoadImageFile(NeedStr(image_path, "image_path"));
    Put(caption, capadapt::Join(l.Generate(l.Extract(img)), " "));
  });
}

cap_status cap_learner_save(const cap_learner* learner, const char* path) {
  return Guard([&] { capadapt::WriteFileAtomic(NeedStr(path, "path"), Need(learner, "learner").value->Snapshot()); });
}

size_t cap_learner_size(const cap_learner* learner) {
  if (!learner) return 0;
  const auto* r = dynamic_cast<const capadapt::RetrievalLearner*>(learner->value.get());
  return r ? r->size() : 0;
}

void cap_learner_free(cap_learner* learner) { delete learner; }

cap_status cap_memory_load(const char* path, cap_memory** out) {
  return Guard([&] {
    NeedOut(out);
    *out = new cap_memory{capadapt::EpisodicMemory::Restore(NeedStr(path, "path"))};
  });
}

cap_status cap_memory_stats(const cap_memory* memory, char** stats_json) {
  return Guard([&] {
    NeedOut(stats_json);
    const auto& m = Need(memory, "memory").value;
    std::map<int, std::size_t> per_task;
    for (const auto& e : m.entries()) ++per_task[e.origin_task];
    json tasks = json::object();
    for (const auto& [t, n] : per_task) tasks[std::to_string(t)] = n;
    Put(stats_json, json{{"entries", m.size()},
                         {"batch_counter", m.batch_counter()},
                         {"total_writes", m.total_writes()},
                         {"total_replays", m.total_replays()},
                         {"write_prob", m.config().write_prob},
                         {"replay_every", m.config().replay_every},
                         {"capacity", m.config().capacity},
                         {"entries_per_task", tasks}}
                        .dump(1) +
                        "\n");
  });
}

void cap_memory_free(cap_memory* memory) { delete memory; }

cap_status cap_run_pretrain(const cap_config* config, char** summary_json) {
  return Guard([&] { Put(summary_json, capadapt::RunPretrain(Need(config, "config").value)); });
}

cap_status cap_run_adapt(const cap_config* config, char** summary_json) {
  return Guard([&] { Put(summary_json, capadapt::RunAdapt(Need(config, "config").value)); });
}

cap_status cap_run_ablate(const cap_config* config, const char* which, char** summary_json) {
  return Guard([&] {
    const std::string w = NeedStr(which, "which");
    const auto& cfg = Need(config, "config").value;
    if (w == "memory") Put(summary_json, capadapt::RunAblateMemory(cfg));
    else if (w == "fraction") Put(summary_json, capadapt::RunAblateFraction(cfg));
    else throw capadapt::InvalidArgument("ablation must be 'memory' or 'fraction'");
  });
}

cap_status cap_run_report(const char* run_dir, char** text) {
  return Guard([&] {
    NeedOut(text);
    Put(text, capadapt::RunReport(NeedStr(run_dir, "run_dir")));
  });
}

cap_status cap_synth(const char* dir, uint64_t seed, int groups, int train_per_group, int val_per_group,
                     char** summary_json) {
  return Guard([&] {
    capadapt::SynthOptions o;
    o.seed = seed;
    o.groups = groups;
    o.train_images_per_group = train_per_group;
    o.val_images_per_group = val_per_group;
    const auto data = capadapt::MakeSynthDataset(o);
    capadapt::WriteSynthDataset(data, NeedStr(dir, "dir"));
    Put(summary_json, json{{"dir", fs::absolute(dir).string()},
                           {"train_images", data.train.size()},
                           {"val_images", data.val.size()},
                           {"config", (fs::absolute(dir) / "capadapt.conf").string()},
                           {"keywords", data.group_keywords}}
                          .dump(1) +
                          "\n");
  });
}

cap_status cap_service_new(const cap_config* config, const char* run_dir, size_t auto_flush, cap_service** out) {
  return Guard([&] {
    NeedOut(out);
    capadapt::ServiceOptions opts;
    opts.config = Need(config, "config").value;
    opts.run_dir = NeedStr(run_dir, "run_dir");
    opts.auto_flush = auto_flush;
    if (!opts.config.tasks_path.empty()) opts.tasks = capadapt::LoadTasks(opts.config);
    std::unique_ptr<capadapt::Learner> initial;
    for (const char* name : {"learner.final", "learner.pretrained"}) {
      const fs::path p = fs::path(run_dir) / name;
      if (fs::exists(p)) {
        initial = capadapt::LoadLearner(opts.config, p.string());
        break;
      }
    }
    auto svc = std::make_unique<cap_service>();
    svc->service = std::make_unique<capadapt::FeedbackService>(std::move(opts), std::move(initial));
    svc->server = std::make_unique<capadapt::ServiceServer>(*svc->service);
    *out = svc.release();
  });
}

cap_status cap_service_bind(cap_service* service, const char* host, int port, int* bound_port) {
  return Guard([&] {
    const int p = Need(service, "service").server->Bind(host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = p;
  });
}

cap_status cap_service_run(cap_service* service) {
  return Guard([&] { Need(service, "service").server->Run(); });
}

cap_status cap_service_stop(cap_service* service) {
  return Guard([&] { Need(service, "service").server->Stop(); });
}

void cap_service_free(cap_service* service) { delete service; }

}  // extern "C"
