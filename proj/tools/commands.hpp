#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace surnn::cli {

struct CommonOptions {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

struct FixturesOptions {
  std::string out;
  std::size_t train_tokens = 50000;
  std::size_t heldout = 500;
  std::size_t dev = 50;
  std::size_t test = 1000;
  double acoustic_noise = 0.8;
  double acoustic_bonus = 0.6;
  int max_alternatives = 3;
};

struct VocabOptions {
  std::string corpus;
  std::string out;
};

struct TrainOptions {
  std::string arch;
  std::string corpus;
  std::string vocab;
  std::string out;
  std::string report;
  std::optional<std::size_t> shortlist;
  long embed = 16;
  long hidden = 32;
  int succ = 1;
  long future_hidden = -1;
  int epochs = 12;
  double lr = 1.0;
  double lr_decay = 0.9;
  double clip = 5.0;
  std::size_t streams = 8;
  std::size_t bptt = 10;
  int order = 3;
  double discount = 0.75;
};

// Language models and combination weights shared by ppl, rescore and tune.
struct LmOptions {
  std::string vocab;
  std::string ngram;
  std::string uni;
  std::string model;  // su or bi
  double lambda1 = 0.75;
  double lambda2 = 0.3;
  double alpha = 0.7;
};

struct PplOptions {
  LmOptions lm;
  std::string text;
  std::string report;
  std::string table;
};

struct ScaleOptions {
  double acoustic = 1.0;
  double lm = 1.0;
};

struct RescoreOptions {
  LmOptions lm;
  ScaleOptions scales;
  std::string lattices;
  std::string nbest;
  std::string out;
  std::string hyp;
  std::string refs;
  std::string report;
  int ngram_approx = 3;
  std::optional<double> beam;
  bool pre_expand = false;
  bool no_cache = false;
};

struct ViterbiOptions {
  ScaleOptions scales;
  std::string lattices;
  std::string hyp;
  std::string refs;
  std::string report;
};

struct NbestOptions {
  ScaleOptions scales;
  std::string lattices;
  std::string out;
  std::size_t n = 100;
};

struct TuneOptions {
  LmOptions lm;
  ScaleOptions scales;
  std::string objective = "wer";
  std::string lattices;
  std::string refs;
  std::string text;
  std::size_t n = 50;
  double step = 0.05;
  std::string report;
};

int cmd_fixtures(const CommonOptions& c, const FixturesOptions& o);
int cmd_vocab(const CommonOptions& c, const VocabOptions& o);
int cmd_train(const CommonOptions& c, const TrainOptions& o);
int cmd_ppl(const CommonOptions& c, const PplOptions& o);
int cmd_rescore(const CommonOptions& c, const RescoreOptions& o);
int cmd_viterbi(const CommonOptions& c, const ViterbiOptions& o);
int cmd_nbest(const CommonOptions& c, const NbestOptions& o);
int cmd_tune(const CommonOptions& c, const TuneOptions& o);

}  // namespace surnn::cli
