#include "mtae/commands.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtae/audio.hpp"
#include "mtae/checkpoint.hpp"
#include "mtae/dataset.hpp"
#include "mtae/parallel.hpp"
#include "mtae/splits.hpp"
#include "mtae/synth.hpp"
#include "mtae/trainer.hpp"

namespace fs = std::filesystem;

namespace mtae {

namespace {

// ---------------------------------------------------------------------------
// Small file helpers

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
}

std::string fmt_double(double v) { return nlohmann::json(v).dump(); }

std::string fmt_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

u64 hash_file_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  u64 h = 1469598103934665603ull;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    std::streamsize got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

u64 mix_hash(u64 h, u64 v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

fs::path resolve_audio(const fs::path& manifest_dir,
                       const std::string& audio_path) {
  fs::path p(audio_path);
  return p.is_relative() ? manifest_dir / p : p;
}

void write_resolved_config(const RunConfig& cfg, const fs::path& out_dir) {
  write_text_file(out_dir / "config.resolved", cfg.serialize());
}

std::vector<UtteranceRecord> subset_by_ids(
    const std::vector<UtteranceRecord>& records,
    const std::vector<std::string>& ids) {
  std::map<std::string, const UtteranceRecord*> by_id;
  for (const auto& r : records) by_id[r.utterance_id] = &r;
  std::vector<UtteranceRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("split references unknown id " + id);
    out.push_back(*it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint metadata

struct RunMeta {
  std::string precision = "f32";
  ModelConfig model;
  LabelSpace labels;
  SpeakerVocab speakers;
  Standardizer standardizer;
  TrainConfig train;
  std::string mode = "mtl";
  std::string scheme = "tenfold";
  std::string label_source = "categorical";
  int fold = 0;
  bool merge_excited = true;
};

nlohmann::ordered_json train_config_json(const TrainConfig& t) {
  nlohmann::ordered_json j;
  j["alpha"] = t.alpha;
  j["beta"] = t.beta;
  j["learning_rate"] = t.learning_rate;
  j["batch_size"] = t.batch_size;
  j["patience"] = t.patience;
  j["lr_floor"] = t.lr_floor;
  j["max_epochs"] = t.max_epochs;
  j["seed"] = t.seed;
  j["aux_mix_ratio"] = t.aux_mix_ratio;
  j["literal_generator_loss"] = t.literal_generator_loss;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.alpha = j.at("alpha").get<double>();
  t.beta = j.at("beta").get<double>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.batch_size = j.at("batch_size").get<int>();
  t.patience = j.at("patience").get<int>();
  t.lr_floor = j.at("lr_floor").get<double>();
  t.max_epochs = j.at("max_epochs").get<int>();
  t.seed = j.at("seed").get<u64>();
  t.aux_mix_ratio = j.at("aux_mix_ratio").get<double>();
  t.literal_generator_loss = j.at("literal_generator_loss").get<bool>();
  return t;
}

std::string run_meta_to_json(const RunMeta& meta) {
  nlohmann::ordered_json j;
  j["precision"] = meta.precision;
  j["model"] = nlohmann::ordered_json::parse(meta.model.to_json());
  j["label_space"] = nlohmann::ordered_json::parse(meta.labels.to_json());
  j["speakers"] = nlohmann::ordered_json::parse(meta.speakers.to_json());
  j["standardizer"] =
      nlohmann::ordered_json::parse(meta.standardizer.to_json());
  j["train"] = train_config_json(meta.train);
  j["mode"] = meta.mode;
  j["scheme"] = meta.scheme;
  j["label_source"] = meta.label_source;
  j["fold"] = meta.fold;
  j["merge_excited"] = meta.merge_excited;
  return j.dump();
}

RunMeta run_meta_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  RunMeta meta;
  meta.precision = j.at("precision").get<std::string>();
  meta.model = ModelConfig::from_json(j.at("model").dump());
  meta.labels = LabelSpace::from_json(j.at("label_space").dump());
  meta.speakers = SpeakerVocab::from_json(j.at("speakers").dump());
  meta.standardizer = Standardizer::from_json(j.at("standardizer").dump());
  meta.train = train_config_from_json(j.at("train"));
  meta.mode = j.at("mode").get<std::string>();
  meta.scheme = j.at("scheme").get<std::string>();
  meta.label_source = j.at("label_source").get<std::string>();
  meta.fold = j.at("fold").get<int>();
  meta.merge_excited = j.at("merge_excited").get<bool>();
  return meta;
}

std::string check_precision(const std::string& precision) {
  if (precision != "f32" && precision != "f64")
    throw ConfigError("precision must be f32 or f64, got '" + precision + "'");
  return precision;
}

// ---------------------------------------------------------------------------
// Shared train-then-maybe-eval job used by cmd_train and cmd_sweep

struct TrainJob {
  fs::path manifest_dir;
  std::string cache_dir;
  fs::path out_dir;
  std::vector<UtteranceRecord> train_records, val_records, test_records;
  std::vector<UtteranceRecord> aux_records;
  bool use_aux_in_fit = false;
  int pretrain_epochs = 0;
  RunMeta meta;  // model/standardizer filled in by the job
  bool save_checkpoint = true;
  bool eval_test = false;
  double dropout = 0.3;
};

struct TrainOutcome {
  FitResult fit;
  double val_wa = 0.0, val_ua = 0.0;
  double test_wa = -1.0, test_ua = -1.0;
};

template <typename T>
TrainOutcome run_train_job(TrainJob& job) {
  const u64 seed = job.meta.train.seed;
  job.meta.labels = LabelSpace::fit(job.meta.label_source, job.train_records,
                                    derive_seed(seed, "clusters"));
  std::vector<const std::vector<UtteranceRecord>*> speaker_sets = {
      &job.train_records};
  if (!job.aux_records.empty()) speaker_sets.push_back(&job.aux_records);
  job.meta.speakers = SpeakerVocab::fit(speaker_sets);

  SegmentSet train_set =
      load_segments(job.manifest_dir.string(), job.cache_dir, job.train_records,
                    job.meta.labels, job.meta.speakers);
  job.meta.standardizer = Standardizer::fit(train_set);
  job.meta.standardizer.apply(train_set);
  SegmentSet val_set =
      load_segments(job.manifest_dir.string(), job.cache_dir, job.val_records,
                    job.meta.labels, job.meta.speakers);
  job.meta.standardizer.apply(val_set);
  SegmentSet aux_set;
  if (!job.aux_records.empty()) {
    aux_set = load_segments(job.manifest_dir.string(), job.cache_dir,
                            job.aux_records, job.meta.labels, job.meta.speakers);
    job.meta.standardizer.apply(aux_set);
  }

  ModelConfig mc;
  mc.emotion_classes = job.meta.labels.n_classes();
  mc.multi_task = job.meta.mode != "stl";
  mc.speaker_classes = mc.multi_task ? job.meta.speakers.size() : 0;
  mc.dropout = job.dropout;
  mc.validate();
  job.meta.model = mc;

  AAEModel<T> model(mc, derive_seed(seed, "model"));
  model.init_params();
  Trainer<T> trainer(model, job.meta.train);

  if (job.pretrain_epochs > 0) {
    if (aux_set.size() == 0)
      throw ConfigError("pretraining requested but no auxiliary data given");
    std::ofstream pre_log(job.out_dir / "pretrain_log.jsonl", std::ios::trunc);
    trainer.pretrain_auxiliary(aux_set, job.pretrain_epochs, &pre_log);
  }

  std::ofstream log(job.out_dir / "train_log.jsonl", std::ios::trunc);
  if (!log) throw Error("cannot write train log under " + job.out_dir.string());
  TrainOutcome outcome;
  outcome.fit = trainer.fit(
      train_set, job.use_aux_in_fit && aux_set.size() > 0 ? &aux_set : nullptr,
      val_set, &log);
  log.close();

  EvalReport val_report = evaluate_emotion(model, val_set);
  outcome.val_wa = val_report.wa;
  outcome.val_ua = val_report.ua;

  if (job.save_checkpoint) {
    Checkpoint ckpt;
    ckpt.meta_json = run_meta_to_json(job.meta);
    ckpt.groups = model.to_groups();
    save_checkpoint((job.out_dir / "checkpoint.ckpt").string(), ckpt);
  }

  if (job.eval_test && !job.test_records.empty()) {
    SegmentSet test_set =
        load_segments(job.manifest_dir.string(), job.cache_dir,
                      job.test_records, job.meta.labels, job.meta.speakers);
    job.meta.standardizer.apply(test_set);
    EvalReport test_report = evaluate_emotion(model, test_set);
    outcome.test_wa = test_report.wa;
    outcome.test_ua = test_report.ua;
  }

  nlohmann::ordered_json result;
  result["best_epoch"] = outcome.fit.best_epoch;
  result["best_val_ua"] = outcome.fit.best_ua;
  result["epochs_run"] = outcome.fit.epochs_run;
  result["halvings"] = outcome.fit.halvings;
  result["final_val_wa"] = outcome.val_wa;
  result["final_val_ua"] = outcome.val_ua;
  if (outcome.test_ua >= 0.0) {
    result["test_wa"] = outcome.test_wa;
    result["test_ua"] = outcome.test_ua;
  }
  write_text_file(job.out_dir / "result.json", result.dump(2) + "\n");
  return outcome;
}

TrainOutcome dispatch_train_job(TrainJob& job) {
  if (job.meta.precision == "f64") return run_train_job<double>(job);
  return run_train_job<float>(job);
}

// Builds everything in a TrainJob that comes from config + manifest, which
// cmd_train and cmd_sweep share.
TrainJob make_train_job(const RunConfig& cfg) {
  TrainJob job;
  const std::string manifest = cfg.require_string("manifest");
  job.manifest_dir = fs::path(manifest).parent_path();
  job.cache_dir = cfg.get_string("cache", "");
  job.out_dir = cfg.require_string("out");

  job.meta.mode = cfg.get_string("mode", "mtl");
  if (job.meta.mode != "stl" && job.meta.mode != "mtl" &&
      job.meta.mode != "mtl-aux")
    throw ConfigError("mode must be stl, mtl or mtl-aux");
  job.meta.scheme = cfg.get_string("scheme", "tenfold");
  job.meta.label_source = cfg.get_string("label_source", "categorical");
  job.meta.precision = check_precision(cfg.get_string("precision", "f32"));
  job.meta.fold = cfg.get_int("fold", 0);
  job.meta.merge_excited = cfg.get_bool("merge_excited", true);
  job.dropout = cfg.get_double("dropout", 0.3);
  job.pretrain_epochs = cfg.get_int("pretrain_epochs", 0);

  TrainConfig& t = job.meta.train;
  t.alpha = cfg.get_double("alpha", t.alpha);
  t.beta = cfg.get_double("beta", t.beta);
  t.learning_rate = cfg.get_double("learning_rate", t.learning_rate);
  t.batch_size = cfg.get_int("batch_size", t.batch_size);
  t.patience = cfg.get_int("patience", t.patience);
  t.lr_floor = cfg.get_double("lr_floor", t.lr_floor);
  t.max_epochs = cfg.get_int("max_epochs", t.max_epochs);
  t.seed = cfg.get_u64("seed", 1);
  t.aux_mix_ratio = cfg.get_double("aux_mix_ratio", t.aux_mix_ratio);
  t.literal_generator_loss =
      cfg.get_bool("literal_generator_loss", t.literal_generator_loss);
  t.validate();

  std::vector<UtteranceRecord> records = load_manifest(manifest);
  if (job.meta.merge_excited && job.meta.label_source == "categorical")
    records = merge_happy_excited(std::move(records));

  SplitPlan plan = make_splits(records, job.meta.scheme, t.seed);
  if (job.meta.fold < 0 || job.meta.fold >= static_cast<int>(plan.folds.size()))
    throw ConfigError("fold " + std::to_string(job.meta.fold) +
                      " out of range; scheme has " +
                      std::to_string(plan.folds.size()) + " folds");
  fs::create_directories(job.out_dir);
  save_split((job.out_dir / "split.json").string(), plan);

  const Fold& fold = plan.folds[static_cast<size_t>(job.meta.fold)];
  job.train_records = subset_by_ids(records, fold.train);
  job.val_records = subset_by_ids(records, fold.validation);
  job.test_records = subset_by_ids(records, fold.test);

  job.use_aux_in_fit = job.meta.mode == "mtl-aux";
  const bool needs_aux = job.use_aux_in_fit || job.pretrain_epochs > 0;
  if (needs_aux) {
    std::string aux_manifest = cfg.require_string("aux_manifest");
    job.aux_records = load_manifest(aux_manifest);
    // Auxiliary audio resolves against its own manifest directory; absolute
    // paths survive the loader's join against the main root.
    fs::path aux_dir = fs::path(aux_manifest).parent_path();
    for (auto& r : job.aux_records)
      r.audio_path =
          fs::absolute(resolve_audio(aux_dir, r.audio_path)).string();
  }
  return job;
}

// Records eval results for one checkpoint.
struct FoldEval {
  std::string name;
  double wa = 0.0, ua = 0.0;
};

template <typename T>
FoldEval eval_checkpoint(const fs::path& ckpt_path, const RunMeta& meta,
                         const Checkpoint& ckpt,
                         const std::vector<UtteranceRecord>& raw_records,
                         const fs::path& manifest_dir,
                         const std::string& cache_dir, const fs::path& out_dir) {
  std::vector<UtteranceRecord> records = raw_records;
  if (meta.merge_excited && meta.label_source == "categorical")
    records = merge_happy_excited(std::move(records));

  SplitPlan plan = make_splits(records, meta.scheme, meta.train.seed);
  if (meta.fold < 0 || meta.fold >= static_cast<int>(plan.folds.size()))
    throw Error("checkpoint fold index does not fit this manifest");
  const Fold& fold = plan.folds[static_cast<size_t>(meta.fold)];
  std::vector<UtteranceRecord> test_records = subset_by_ids(records, fold.test);

  if (meta.scheme == "loso") {
    std::set<std::string> covered(meta.speakers.speakers.begin(),
                                  meta.speakers.speakers.end());
    for (const auto& r : test_records)
      if (covered.count(r.speaker_id) > 0)
        throw Error("leakage guard: checkpoint speaker head covers test "
                    "speaker " + r.speaker_id);
  }

  SegmentSet test_set = load_segments(manifest_dir.string(), cache_dir,
                                      test_records, meta.labels, meta.speakers);
  meta.standardizer.apply(test_set);

  AAEModel<T> model(meta.model, 0);
  model.load_groups(ckpt.groups);
  EvalReport report = evaluate_emotion(model, test_set);

  std::string name = ckpt_path.filename() == "checkpoint.ckpt"
                         ? ckpt_path.parent_path().filename().string()
                         : ckpt_path.stem().string();
  fs::path fold_dir = out_dir / name;
  fs::create_directories(fold_dir);
  write_text_file(fold_dir / "report.json", eval_report_to_json(report) + "\n");
  write_text_file(fold_dir / "report.txt",
                  eval_report_to_text(report, meta.labels.classes));
  write_text_file(fold_dir / "confusion.csv",
                  confusion_to_csv(report, meta.labels.classes));
  return {name, report.wa, report.ua};
}

// ---------------------------------------------------------------------------
// Simple SVG line plot for sweep outputs

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  const double w = 640, h = 400, ml = 64, mr = 24, mt = 40, mb = 48;
  double x_min = *std::min_element(xs.begin(), xs.end());
  double x_max = *std::max_element(xs.begin(), xs.end());
  double y_min = *std::min_element(ys.begin(), ys.end());
  double y_max = *std::max_element(ys.begin(), ys.end());
  if (x_max == x_min) x_max = x_min + 1.0;
  double pad = (y_max - y_min) * 0.1;
  if (pad == 0.0) pad = 1.0;
  y_min -= pad;
  y_max += pad;

  auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min) * (w - ml - mr);
  };
  auto py = [&](double y) {
    return h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
      << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double y = y_min + (y_max - y_min) * tick / 4.0;
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(y) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" << fmt_percent(y) << "</text>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << py(y) << "\" x2=\"" << w - mr
        << "\" y2=\"" << py(y) << "\" stroke=\"#ddd\"/>\n";
  }
  for (size_t i = 0; i < xs.size(); ++i)
    svg << "<text x=\"" << px(xs[i]) << "\" y=\"" << h - mb + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" << fmt_double(xs[i]) << "</text>\n";
  svg << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" << x_label << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i)
    svg << px(xs[i]) << "," << py(ys[i]) << " ";
  svg << "\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i)
    svg << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
        << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg) {
  cfg.restrict_keys({"out", "speakers", "utterances_per_speaker", "classes",
                     "seed", "snr_db", "duration_min", "duration_max",
                     "emotion_labeled_fraction", "corpus_tag",
                     "speaker_prefix"});
  SynthSpec spec;
  spec.n_speakers = cfg.get_int("speakers", spec.n_speakers);
  spec.utterances_per_speaker =
      cfg.get_int("utterances_per_speaker", spec.utterances_per_speaker);
  spec.classes = cfg.get_int("classes", spec.classes);
  spec.seed = cfg.get_u64("seed", spec.seed);
  spec.snr_db = cfg.get_double("snr_db", spec.snr_db);
  spec.duration_min = cfg.get_double("duration_min", spec.duration_min);
  spec.duration_max = cfg.get_double("duration_max", spec.duration_max);
  spec.emotion_labeled_fraction = cfg.get_double(
      "emotion_labeled_fraction", spec.emotion_labeled_fraction);
  spec.corpus_tag = cfg.get_string("corpus_tag", spec.corpus_tag);
  spec.speaker_prefix = cfg.get_string("speaker_prefix", spec.speaker_prefix);

  const fs::path out = cfg.require_string("out");
  fs::create_directories(out);
  write_resolved_config(cfg, out);
  auto records = generate_corpus(spec, out.string());
  std::cout << "wrote " << records.size() << " utterances ("
            << spec.n_speakers << " speakers) to " << out.string() << "\n";
  return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
  cfg.restrict_keys({"manifest", "out", "silence_threshold_db"});
  const std::string manifest = cfg.require_string("manifest");
  const fs::path out = cfg.require_string("out");
  const double threshold = cfg.get_double("silence_threshold_db", -40.0);

  std::vector<UtteranceRecord> records = load_manifest(manifest);
  fs::create_directories(out);
  write_resolved_config(cfg, out);
  const fs::path manifest_dir = fs::path(manifest).parent_path();

  std::atomic<i64> processed{0}, skipped{0};
  std::vector<std::string> failures(records.size());
  parallel_for(static_cast<i64>(records.size()), [&](i64 i) {
    const auto& r = records[static_cast<size_t>(i)];
    try {
      fs::path wav = resolve_audio(manifest_dir, r.audio_path);
      u64 h = mix_hash(hash_file_bytes(wav),
                       std::bit_cast<u64>(threshold));
      std::string cache = cache_path_for(out.string(), r.utterance_id);
      if (fs::exists(cache) && fs::exists(cache + ".json")) {
        if (read_segment_index(cache).source_hash == h) {
          ++skipped;
          return;
        }
      }
      FrontendResult fr = compute_frontend(load_wav(wav.string()), threshold);
      if (fr.silence_warning)
        log_warn(r.utterance_id + ": no frames above the silence threshold");
      write_spectrogram_cache(cache, fr.spec);
      write_segment_index(cache, fr, h);
      ++processed;
    } catch (const std::exception& e) {
      failures[static_cast<size_t>(i)] = e.what();
    }
  });

  i64 failed = 0;
  for (size_t i = 0; i < failures.size(); ++i) {
    if (failures[i].empty()) continue;
    ++failed;
    std::cerr << "[mtae] " << records[i].utterance_id << ": " << failures[i]
              << "\n";
  }
  std::cout << "preprocessed " << processed << ", up-to-date " << skipped
            << ", failed " << failed << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_train(const RunConfig& cfg) {
  cfg.restrict_keys({"manifest", "cache", "out", "mode", "scheme", "fold",
                     "alpha", "beta", "learning_rate", "batch_size", "patience",
                     "lr_floor", "max_epochs", "seed", "aux_mix_ratio",
                     "literal_generator_loss", "label_source", "precision",
                     "aux_manifest", "pretrain_epochs", "merge_excited",
                     "dropout"});
  TrainJob job = make_train_job(cfg);
  write_resolved_config(cfg, job.out_dir);
  TrainOutcome outcome = dispatch_train_job(job);
  std::cout << "fold " << job.meta.fold << ": best epoch "
            << outcome.fit.best_epoch << ", val UA "
            << fmt_percent(outcome.val_ua) << "%, val WA "
            << fmt_percent(outcome.val_wa) << "% ("
            << outcome.fit.epochs_run << " epochs, "
            << outcome.fit.halvings << " halvings)\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  cfg.restrict_keys({"checkpoint", "manifest", "cache", "out"});
  const fs::path ckpt_arg = cfg.require_string("checkpoint");
  const std::string manifest = cfg.require_string("manifest");
  const std::string cache = cfg.get_string("cache", "");
  const fs::path out = cfg.require_string("out");

  std::vector<fs::path> ckpt_paths;
  if (fs::is_directory(ckpt_arg)) {
    std::vector<fs::path> children;
    for (const auto& entry : fs::directory_iterator(ckpt_arg))
      children.push_back(entry.path());
    std::sort(children.begin(), children.end());
    for (const auto& child : children) {
      if (fs::is_directory(child) && fs::exists(child / "checkpoint.ckpt"))
        ckpt_paths.push_back(child / "checkpoint.ckpt");
      else if (child.extension() == ".ckpt")
        ckpt_paths.push_back(child);
    }
  } else {
    ckpt_paths.push_back(ckpt_arg);
  }
  if (ckpt_paths.empty())
    throw ConfigError("no checkpoints found under " + ckpt_arg.string());

  fs::create_directories(out);
  write_resolved_config(cfg, out);
  std::vector<UtteranceRecord> records = load_manifest(manifest);
  const fs::path manifest_dir = fs::path(manifest).parent_path();

  std::vector<FoldEval> evals;
  for (const auto& path : ckpt_paths) {
    Checkpoint ckpt = load_checkpoint(path.string());
    RunMeta meta = run_meta_from_json(ckpt.meta_json);
    check_precision(meta.precision);
    FoldEval fe =
        meta.precision == "f64"
            ? eval_checkpoint<double>(path, meta, ckpt, records, manifest_dir,
                                      cache, out)
            : eval_checkpoint<float>(path, meta, ckpt, records, manifest_dir,
                                     cache, out);
    std::cout << fe.name << ": WA " << fmt_percent(fe.wa) << "%  UA "
              << fmt_percent(fe.ua) << "%\n";
    evals.push_back(fe);
  }

  auto mean_std = [](const std::vector<FoldEval>& v, bool ua) {
    double mean = 0.0;
    for (const auto& e : v) mean += ua ? e.ua : e.wa;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (const auto& e : v) {
      double d = (ua ? e.ua : e.wa) - mean;
      var += d * d;
    }
    double std_dev =
        v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    return std::pair<double, double>{mean, std_dev};
  };
  auto [wa_mean, wa_std] = mean_std(evals, false);
  auto [ua_mean, ua_std] = mean_std(evals, true);

  nlohmann::ordered_json summary;
  summary["folds"] = nlohmann::ordered_json::array();
  for (const auto& e : evals)
    summary["folds"].push_back({{"name", e.name}, {"wa", e.wa}, {"ua", e.ua}});
  summary["wa_mean"] = wa_mean;
  summary["wa_std"] = wa_std;
  summary["ua_mean"] = ua_mean;
  summary["ua_std"] = ua_std;
  write_text_file(out / "summary.json", summary.dump(2) + "\n");

  std::ostringstream text;
  text << "folds: " << evals.size() << "\n"
       << "WA " << fmt_percent(wa_mean) << " +/- " << fmt_percent(wa_std)
       << "\n"
       << "UA " << fmt_percent(ua_mean) << " +/- " << fmt_percent(ua_std)
       << "\n";
  write_text_file(out / "summary.txt", text.str());
  std::cout << "aggregate WA " << fmt_percent(wa_mean) << " +/- "
            << fmt_percent(wa_std) << ", UA " << fmt_percent(ua_mean)
            << " +/- " << fmt_percent(ua_std) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  cfg.restrict_keys({"manifest", "cache", "out", "sweep", "values", "mode",
                     "scheme", "fold", "alpha", "beta", "learning_rate",
                     "batch_size", "patience", "lr_floor", "max_epochs", "seed",
                     "aux_mix_ratio", "literal_generator_loss", "label_source",
                     "precision", "aux_manifest", "merge_excited", "dropout"});
  const std::string sweep = cfg.require_string("sweep");
  if (sweep != "alpha" && sweep != "beta" && sweep != "aux_speakers")
    throw ConfigError("sweep must be alpha, beta or aux_speakers");

  std::vector<double> values;
  if (cfg.has("values")) {
    std::istringstream in(cfg.get_string("values", ""));
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        values.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad sweep value '" + item + "'");
      }
    }
    if (values.empty()) throw ConfigError("empty sweep value list");
  } else if (sweep == "alpha") {
    for (int i = 1; i <= 10; ++i) values.push_back(i / 10.0);
  } else if (sweep == "beta") {
    for (int i = 1; i <= 9; ++i) values.push_back(i / 10.0);
  } else {
    throw ConfigError("aux_speakers sweep needs an explicit values list");
  }

  const fs::path out = cfg.require_string("out");
  fs::create_directories(out);
  write_resolved_config(cfg, out);

  std::vector<double> ua_points;
  std::ostringstream csv;
  csv << "param,value,best_epoch,val_ua,test_wa,test_ua\n";
  for (double value : values) {
    std::string tag = sweep + "_" + fmt_double(value);
    fs::path point_dir = out / "points" / tag;
    fs::path result_path = point_dir / "result.json";

    nlohmann::json result;
    if (fs::exists(result_path)) {
      std::ifstream f(result_path);
      result = nlohmann::json::parse(f);
      log_info("sweep: reusing finished point " + tag);
    } else {
      fs::create_directories(point_dir);
      RunConfig point_cfg = cfg;
      point_cfg.set("out", point_dir.string());
      if (sweep == "alpha") point_cfg.set("alpha", fmt_double(value));
      if (sweep == "beta") point_cfg.set("beta", fmt_double(value));

      TrainJob job;
      if (sweep == "aux_speakers") {
        i64 n = static_cast<i64>(value);
        if (n < 0 || static_cast<double>(n) != value)
          throw ConfigError("aux_speakers sweep values must be whole counts");
        point_cfg.set("mode", n == 0 ? "mtl" : "mtl-aux");
        job = make_train_job(point_cfg);
        if (n > 0) {
          std::set<std::string> keep;
          for (const auto& r : job.aux_records) {
            if (static_cast<i64>(keep.size()) >= n && keep.count(r.speaker_id) == 0)
              continue;
            keep.insert(r.speaker_id);
          }
          if (static_cast<i64>(keep.size()) < n)
            throw ConfigError("aux manifest has only " +
                              std::to_string(keep.size()) + " speakers");
          std::vector<std::string> sorted(keep.begin(), keep.end());
          sorted.resize(static_cast<size_t>(n));
          std::set<std::string> chosen(sorted.begin(), sorted.end());
          std::vector<UtteranceRecord> filtered;
          for (auto& r : job.aux_records)
            if (chosen.count(r.speaker_id) > 0) filtered.push_back(std::move(r));
          job.aux_records = std::move(filtered);
        }
      } else {
        job = make_train_job(point_cfg);
      }
      job.save_checkpoint = false;
      job.eval_test = true;
      write_resolved_config(point_cfg, point_dir);
      dispatch_train_job(job);
      std::ifstream f(result_path);
      result = nlohmann::json::parse(f);
    }

    double test_ua = result.at("test_ua").get<double>();
    csv << sweep << "," << fmt_double(value) << ","
        << result.at("best_epoch").get<int>() << ","
        << fmt_double(result.at("final_val_ua").get<double>()) << ","
        << fmt_double(result.at("test_wa").get<double>()) << ","
        << fmt_double(test_ua) << "\n";
    ua_points.push_back(test_ua);
    std::cout << tag << ": test UA " << fmt_percent(test_ua) << "%\n";
  }

  write_text_file(out / "sweep.csv", csv.str());
  write_text_file(out / "sweep.svg",
                  svg_line_plot("test UA vs " + sweep, sweep, values,
                                ua_points));
  std::cout << "sweep finished: " << values.size() << " points -> "
            << (out / "sweep.csv").string() << "\n";
  return 0;
}

namespace {

template <typename T>
VerificationReport verify_with(const Checkpoint& ckpt, const RunMeta& meta,
                               const std::string& enrol_manifest,
                               const std::string& trial_manifest,
                               const std::string& cache, int enrol_count) {
  AAEModel<T> model(meta.model, 0);
  model.load_groups(ckpt.groups);

  auto embed = [&](const std::string& manifest) {
    std::vector<UtteranceRecord> records = load_manifest(manifest);
    SegmentSet set =
        load_segments(fs::path(manifest).parent_path().string(), cache,
                      records, meta.labels, meta.speakers);
    meta.standardizer.apply(set);
    return extract_dvectors(model, set);
  };
  std::vector<SpeakerEmbedding> enrolment = embed(enrol_manifest);
  std::vector<SpeakerEmbedding> trials = embed(trial_manifest);
  return verification_protocol(enrolment, trials, enrol_count);
}

}  // namespace

int cmd_verify(const RunConfig& cfg) {
  cfg.restrict_keys({"checkpoint", "enrolment_manifest", "trial_manifest",
                     "cache", "out", "enrol_count"});
  const std::string ckpt_path = cfg.require_string("checkpoint");
  const std::string enrol_manifest = cfg.require_string("enrolment_manifest");
  const std::string trial_manifest = cfg.require_string("trial_manifest");
  const std::string cache = cfg.get_string("cache", "");
  const fs::path out = cfg.require_string("out");
  const int enrol_count = cfg.get_int("enrol_count", 20);

  Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunMeta meta = run_meta_from_json(ckpt.meta_json);
  check_precision(meta.precision);

  VerificationReport report =
      meta.precision == "f64"
          ? verify_with<double>(ckpt, meta, enrol_manifest, trial_manifest,
                                cache, enrol_count)
          : verify_with<float>(ckpt, meta, enrol_manifest, trial_manifest,
                               cache, enrol_count);

  fs::create_directories(out);
  write_resolved_config(cfg, out);
  write_text_file(out / "verification.json",
                  verification_report_to_json(report) + "\n");
  write_text_file(out / "verification.txt",
                  verification_report_to_text(report));
  std::cout << verification_report_to_text(report);
  return 0;
}

}  // namespace mtae
