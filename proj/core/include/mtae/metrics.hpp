#pragma once

#include <string>
#include <vector>

#include "mtae/common.hpp"

namespace mtae {

struct EvalReport {
  int classes = 0;
  std::vector<i64> confusion;  // classes x classes, rows true, cols predicted
  double wa = 0.0;             // percent
  double ua = 0.0;             // percent, mean recall over present classes
  std::vector<double> per_class_recall;  // percent; -1 marks absent classes
  std::vector<int> absent_classes;
  i64 n_utterances = 0;

  i64 at(int t, int p) const {
    return confusion[static_cast<size_t>(t * classes + p)];
  }
};

EvalReport compute_wa_ua(const std::vector<int>& y_true,
                         const std::vector<int>& y_pred, int classes);

// Unweighted mean of segment posteriors; prediction ties go to the lowest
// class index.
std::vector<double> average_posteriors(
    const std::vector<std::vector<double>>& segment_posteriors);
int argmax_lowest(const std::vector<double>& values);

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b);

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over the sorted score union. FAR(t) = share of impostor
// scores >= t, FRR(t) = share of genuine scores < t; the crossing is linearly
// interpolated when the curves jump past each other.
EerResult compute_eer(const std::vector<double>& genuine,
                      const std::vector<double>& impostor);

struct SpeakerEmbedding {
  std::string speaker_id;
  std::string utterance_id;
  std::vector<double> values;
};

struct VerificationReport {
  EerResult eer;
  i64 genuine_trials = 0;
  i64 impostor_trials = 0;
  i64 enrolled_speakers = 0;
  std::vector<std::string> excluded_speakers;
};

// Enrolment centroid per speaker = mean of its enrolment d-vectors; every
// trial utterance is scored against every enrolled speaker with cosine
// similarity. Speakers with fewer than enrol_count enrolment utterances are
// excluded (warning in the report).
VerificationReport verification_protocol(
    const std::vector<SpeakerEmbedding>& enrolment,
    const std::vector<SpeakerEmbedding>& trials, int enrol_count = 20);

// Single-pool variant: per speaker, the first enrol_count utterances (by id)
// enrol and the rest become trials; speakers without at least one trial are
// excluded.
VerificationReport verification_protocol(
    const std::vector<SpeakerEmbedding>& pool, int enrol_count = 20);

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_to_text(const EvalReport& report,
                                const std::vector<std::string>& class_names);
std::string confusion_to_csv(const EvalReport& report,
                             const std::vector<std::string>& class_names);
std::string verification_report_to_json(const VerificationReport& report);
std::string verification_report_to_text(const VerificationReport& report);

}  // namespace mtae
