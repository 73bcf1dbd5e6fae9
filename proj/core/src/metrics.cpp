#include "mtae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mtae {

EvalReport compute_wa_ua(const std::vector<int>& y_true,
                         const std::vector<int>& y_pred, int classes) {
  if (y_true.size() != y_pred.size())
    throw Error("compute_wa_ua: label vectors differ in length");
  if (y_true.empty()) throw Error("compute_wa_ua: no samples");
  if (classes < 1) throw Error("compute_wa_ua: bad class count");

  EvalReport r;
  r.classes = classes;
  r.confusion.assign(static_cast<size_t>(classes) * classes, 0);
  r.n_utterances = static_cast<i64>(y_true.size());
  for (size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes)
      throw Error("compute_wa_ua: label outside [0," + std::to_string(classes) +
                  ")");
    ++r.confusion[static_cast<size_t>(t * classes + p)];
  }

  i64 correct = 0;
  double recall_sum = 0;
  int present = 0;
  r.per_class_recall.assign(static_cast<size_t>(classes), -1.0);
  for (int c = 0; c < classes; ++c) {
    i64 row = 0;
    for (int p = 0; p < classes; ++p) row += r.at(c, p);
    correct += r.at(c, c);
    if (row == 0) {
      r.absent_classes.push_back(c);
      continue;
    }
    double recall = 100.0 * static_cast<double>(r.at(c, c)) /
                    static_cast<double>(row);
    r.per_class_recall[static_cast<size_t>(c)] = recall;
    recall_sum += recall;
    ++present;
  }
  r.wa = 100.0 * static_cast<double>(correct) /
         static_cast<double>(r.n_utterances);
  r.ua = present > 0 ? recall_sum / present : 0.0;
  return r;
}

std::vector<double> average_posteriors(
    const std::vector<std::vector<double>>& segment_posteriors) {
  if (segment_posteriors.empty())
    throw Error("average_posteriors: empty segment group");
  size_t k = segment_posteriors.front().size();
  std::vector<double> mean(k, 0.0);
  for (const auto& row : segment_posteriors) {
    if (row.size() != k)
      throw Error("average_posteriors: ragged posterior rows");
    for (size_t j = 0; j < k; ++j) mean[j] += row[j];
  }
  for (auto& v : mean) v /= static_cast<double>(segment_posteriors.size());
  return mean;
}

int argmax_lowest(const std::vector<double>& values) {
  if (values.empty()) throw Error("argmax of empty vector");
  int best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[static_cast<size_t>(best)])
      best = static_cast<int>(i);
  return best;
}

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error("cosine_similarity: dimension mismatch");
  if (a.empty()) throw Error("cosine_similarity: empty vectors");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw Error("cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

EerResult compute_eer(const std::vector<double>& genuine,
                      const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty())
    throw Error("compute_eer: need both genuine and impostor scores");

  std::vector<double> thresholds;
  thresholds.reserve(genuine.size() + impostor.size() + 1);
  thresholds.insert(thresholds.end(), genuine.begin(), genuine.end());
  thresholds.insert(thresholds.end(), impostor.begin(), impostor.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  // Sentinel beyond the top score: FAR 0, FRR 1.
  thresholds.push_back(thresholds.back() + 1.0);

  std::vector<double> sorted_gen = genuine, sorted_imp = impostor;
  std::sort(sorted_gen.begin(), sorted_gen.end());
  std::sort(sorted_imp.begin(), sorted_imp.end());
  auto far_at = [&](double t) {
    auto it = std::lower_bound(sorted_imp.begin(), sorted_imp.end(), t);
    return static_cast<double>(sorted_imp.end() - it) /
           static_cast<double>(sorted_imp.size());
  };
  auto frr_at = [&](double t) {
    auto it = std::lower_bound(sorted_gen.begin(), sorted_gen.end(), t);
    return static_cast<double>(it - sorted_gen.begin()) /
           static_cast<double>(sorted_gen.size());
  };

  double prev_t = thresholds[0];
  double prev_diff = far_at(prev_t) - frr_at(prev_t);
  for (double t : thresholds) {
    double far = far_at(t), frr = frr_at(t);
    double diff = far - frr;
    if (diff <= 0) {
      EerResult out;
      if (diff == 0 || prev_diff <= 0) {
        out.eer_percent = 100.0 * 0.5 * (far + frr);
        out.threshold = t;
      } else {
        double lambda = prev_diff / (prev_diff - diff);
        double prev_far = far_at(prev_t), prev_frr = frr_at(prev_t);
        double eer =
            prev_far + lambda * (far - prev_far);
        double eer2 = prev_frr + lambda * (frr - prev_frr);
        out.eer_percent = 100.0 * 0.5 * (eer + eer2);
        out.threshold = prev_t + lambda * (t - prev_t);
      }
      return out;
    }
    prev_t = t;
    prev_diff = diff;
  }
  throw Error("compute_eer: FAR/FRR curves never crossed");
}

namespace {

VerificationReport run_verification(
    const std::map<std::string, std::vector<double>>& centroids,
    const std::vector<SpeakerEmbedding>& trials,
    std::vector<std::string> excluded) {
  std::vector<double> genuine, impostor;
  for (const auto& trial : trials) {
    for (const auto& [spk, centroid] : centroids) {
      double score = cosine_similarity(trial.values, centroid);
      if (spk == trial.speaker_id)
        genuine.push_back(score);
      else
        impostor.push_back(score);
    }
  }
  VerificationReport report;
  report.excluded_speakers = std::move(excluded);
  report.enrolled_speakers = static_cast<i64>(centroids.size());
  report.genuine_trials = static_cast<i64>(genuine.size());
  report.impostor_trials = static_cast<i64>(impostor.size());
  if (genuine.empty() || impostor.empty())
    throw Error("verification: no " +
                std::string(genuine.empty() ? "genuine" : "impostor") +
                " trials; check enrolment/trial speaker overlap");
  report.eer = compute_eer(genuine, impostor);
  return report;
}

std::map<std::string, std::vector<SpeakerEmbedding>> group_sorted(
    const std::vector<SpeakerEmbedding>& embeddings) {
  std::map<std::string, std::vector<SpeakerEmbedding>> by_speaker;
  for (const auto& e : embeddings) by_speaker[e.speaker_id].push_back(e);
  for (auto& [spk, utts] : by_speaker)
    std::sort(utts.begin(), utts.end(),
              [](const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
                return a.utterance_id < b.utterance_id;
              });
  return by_speaker;
}

std::vector<double> mean_embedding(const std::vector<SpeakerEmbedding>& utts,
                                   size_t count) {
  std::vector<double> mean(utts.front().values.size(), 0.0);
  for (size_t i = 0; i < count; ++i) {
    if (utts[i].values.size() != mean.size())
      throw Error("verification: embedding dimension mismatch");
    for (size_t j = 0; j < mean.size(); ++j) mean[j] += utts[i].values[j];
  }
  for (auto& v : mean) v /= static_cast<double>(count);
  return mean;
}

}  // namespace

VerificationReport verification_protocol(
    const std::vector<SpeakerEmbedding>& enrolment,
    const std::vector<SpeakerEmbedding>& trials, int enrol_count) {
  if (enrol_count < 1) throw Error("verification: bad enrolment count");
  auto by_speaker = group_sorted(enrolment);
  std::map<std::string, std::vector<double>> centroids;
  std::vector<std::string> excluded;
  for (const auto& [spk, utts] : by_speaker) {
    if (utts.size() < static_cast<size_t>(enrol_count)) {
      excluded.push_back(spk);
      log_warn("verification: speaker " + spk + " has only " +
               std::to_string(utts.size()) + " enrolment utterances; excluded");
      continue;
    }
    centroids[spk] = mean_embedding(utts, static_cast<size_t>(enrol_count));
  }
  if (centroids.empty()) throw Error("verification: no speaker enrollable");
  return run_verification(centroids, trials, std::move(excluded));
}

VerificationReport verification_protocol(
    const std::vector<SpeakerEmbedding>& pool, int enrol_count) {
  if (enrol_count < 1) throw Error("verification: bad enrolment count");
  auto by_speaker = group_sorted(pool);
  std::map<std::string, std::vector<double>> centroids;
  std::vector<SpeakerEmbedding> trials;
  std::vector<std::string> excluded;
  for (const auto& [spk, utts] : by_speaker) {
    if (utts.size() < static_cast<size_t>(enrol_count) + 1) {
      excluded.push_back(spk);
      log_warn("verification: speaker " + spk + " has " +
               std::to_string(utts.size()) + " utterances, needs " +
               std::to_string(enrol_count + 1) + "; excluded");
      continue;
    }
    centroids[spk] = mean_embedding(utts, static_cast<size_t>(enrol_count));
    trials.insert(trials.end(), utts.begin() + enrol_count, utts.end());
  }
  if (centroids.empty()) throw Error("verification: no speaker enrollable");
  return run_verification(centroids, trials, std::move(excluded));
}

// ---------------------------------------------------------------------------
// Report emission

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n_utterances"] = report.n_utterances;
  j["classes"] = report.classes;
  j["wa"] = report.wa;
  j["ua"] = report.ua;
  j["per_class_recall"] = report.per_class_recall;
  j["absent_classes"] = report.absent_classes;
  j["confusion"] = nlohmann::ordered_json::array();
  for (int t = 0; t < report.classes; ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int p = 0; p < report.classes; ++p) row.push_back(report.at(t, p));
    j["confusion"].push_back(row);
  }
  return j.dump(2);
}

std::string eval_report_to_text(const EvalReport& report,
                                const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "utterances: " << report.n_utterances << "\n";
  os << "WA: " << report.wa << "%   UA: " << report.ua << "%\n\n";
  size_t width = 8;
  for (const auto& n : class_names) width = std::max(width, n.size() + 2);
  os << std::string(width, ' ');
  for (const auto& n : class_names) {
    os << n;
    os << std::string(width - n.size(), ' ');
  }
  os << "recall\n";
  for (int t = 0; t < report.classes; ++t) {
    const std::string& name = class_names[static_cast<size_t>(t)];
    os << name << std::string(width - name.size(), ' ');
    for (int p = 0; p < report.classes; ++p) {
      std::string cell = std::to_string(report.at(t, p));
      os << cell << std::string(width - cell.size(), ' ');
    }
    double rec = report.per_class_recall[static_cast<size_t>(t)];
    if (rec < 0)
      os << "absent";
    else
      os << rec << "%";
    os << "\n";
  }
  return os.str();
}

std::string confusion_to_csv(const EvalReport& report,
                             const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& n : class_names) os << "," << n;
  os << "\n";
  for (int t = 0; t < report.classes; ++t) {
    os << class_names[static_cast<size_t>(t)];
    for (int p = 0; p < report.classes; ++p) os << "," << report.at(t, p);
    os << "\n";
  }
  return os.str();
}

std::string verification_report_to_json(const VerificationReport& report) {
  nlohmann::ordered_json j;
  j["eer_percent"] = report.eer.eer_percent;
  j["threshold"] = report.eer.threshold;
  j["genuine_trials"] = report.genuine_trials;
  j["impostor_trials"] = report.impostor_trials;
  j["enrolled_speakers"] = report.enrolled_speakers;
  j["excluded_speakers"] = report.excluded_speakers;
  return j.dump(2);
}

std::string verification_report_to_text(const VerificationReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "EER: " << report.eer.eer_percent << "%  (threshold "
     << report.eer.threshold << ")\n";
  os << "enrolled speakers: " << report.enrolled_speakers << "\n";
  os << "genuine trials: " << report.genuine_trials
     << "  impostor trials: " << report.impostor_trials << "\n";
  if (!report.excluded_speakers.empty()) {
    os << "excluded:";
    for (const auto& s : report.excluded_speakers) os << " " << s;
    os << "\n";
  }
  return os.str();
}

}  // namespace mtae
