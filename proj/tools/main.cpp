#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "surnn/error.hpp"

namespace {

using namespace surnn::cli;

// Reads "key = value" lines (# comments allowed) and turns them into
// "--key=value" arguments. They are placed before the real arguments so that
// explicit flags win.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw surnn::FormatError("cannot open config file", path);
  std::vector<std::string> args;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw surnn::FormatError("expected key=value", path + ":" + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw surnn::FormatError("empty key", path + ":" + std::to_string(lineno));
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

void add_common(CLI::App* app, CommonOptions& c) {
  app->add_option("--seed", c.seed, "Random seed for initialization and fixtures")
      ->capture_default_str();
  app->add_option("--jobs", c.jobs, "Parallel workers across lattices or sentences")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--config", "key=value file with defaults for any flag of this command");
}

void add_lms(CLI::App* app, LmOptions& o) {
  app->add_option("--vocab", o.vocab, "Vocabulary file");
  app->add_option("--ngram", o.ngram, "ARPA back-off model");
  app->add_option("--uni", o.uni, "uni-RNNLM model file");
  app->add_option("--model", o.model, "su-RNNLM or bi-RNNLM model file");
  app->add_option("--lambda1", o.lambda1, "Linear weight of the uni-RNNLM against the n-gram")
      ->capture_default_str();
  app->add_option("--lambda2", o.lambda2, "Log-linear weight of the su/bi model")
      ->capture_default_str();
  app->add_option("--alpha", o.alpha, "Smoothing exponent for su/bi probabilities")
      ->capture_default_str();
}

void add_scales(CLI::App* app, ScaleOptions& s) {
  app->add_option("--acoustic-scale", s.acoustic, "Acoustic score scale")->capture_default_str();
  app->add_option("--lm-scale", s.lm, "Language model score scale")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surnn: recurrent language models with succeeding words, lattice rescoring"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.get_formatter()->column_width(34);

  CommonOptions common;

  FixturesOptions fx;
  auto* fixtures = app.add_subcommand("fixtures", "Generate the synthetic corpus and lattice set");
  add_common(fixtures, common);
  fixtures->add_option("--out", fx.out, "Output directory")->required();
  fixtures->add_option("--train-tokens", fx.train_tokens, "Training tokens")->capture_default_str();
  fixtures->add_option("--heldout", fx.heldout, "Held-out sentences")->capture_default_str();
  fixtures->add_option("--dev", fx.dev, "Development utterances")->capture_default_str();
  fixtures->add_option("--test", fx.test, "Test utterances")->capture_default_str();
  fixtures->add_option("--acoustic-noise", fx.acoustic_noise, "Std. dev. of acoustic scores")
      ->capture_default_str();
  fixtures->add_option("--acoustic-bonus", fx.acoustic_bonus, "Score bonus of the correct word")
      ->capture_default_str();
  fixtures->add_option("--max-alternatives", fx.max_alternatives, "Candidates per slot")
      ->capture_default_str();

  VocabOptions vo;
  auto* vocab = app.add_subcommand("vocab", "Build a vocabulary file from a corpus");
  add_common(vocab, common);
  vocab->add_option("--corpus", vo.corpus, "Training text, one sentence per line")->required();
  vocab->add_option("--out", vo.out, "Vocabulary file to write")->required();

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Train a uni, bi, su or n-gram language model");
  add_common(train, common);
  train->add_option("--arch", to.arch, "uni, bi, su or ngram")->required();
  train->add_option("--corpus", to.corpus, "Training text")->required();
  train->add_option("--vocab", to.vocab, "Vocabulary file")->required();
  train->add_option("--out", to.out, "Model file (ARPA for ngram)")->required();
  train->add_option("--report", to.report, "Training summary file");
  train->add_option("--shortlist", to.shortlist, "Output shortlist size (default: all words)");
  train->add_option("--embed", to.embed, "Embedding size D")->capture_default_str();
  train->add_option("--hidden", to.hidden, "Recurrent size H")->capture_default_str();
  train->add_option("--succ", to.succ, "Succeeding words k (su only)")->capture_default_str();
  train->add_option("--future-hidden", to.future_hidden, "Future unit size (default: H)");
  train->add_option("--epochs", to.epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", to.lr, "Initial learning rate")->capture_default_str();
  train->add_option("--lr-decay", to.lr_decay, "Learning rate factor per epoch")
      ->capture_default_str();
  train->add_option("--clip", to.clip, "Gradient norm clip (0 disables)")->capture_default_str();
  train->add_option("--streams", to.streams, "Parallel streams / sentences per batch")
      ->capture_default_str();
  train->add_option("--bptt", to.bptt, "Truncated BPTT length")->capture_default_str();
  train->add_option("--order", to.order, "n-gram order")->capture_default_str();
  train->add_option("--discount", to.discount, "Kneser-Ney discount")->capture_default_str();

  PplOptions po;
  auto* ppl = app.add_subcommand(
      "ppl", "Perplexity (pseudo-perplexity whenever a su or bi model is involved)");
  add_common(ppl, common);
  add_lms(ppl, po.lm);
  ppl->add_option("--text", po.text, "Evaluation text")->required();
  ppl->add_option("--report", po.report, "Summary file");
  ppl->add_option("--table", po.table, "Per-sentence table file");

  ViterbiOptions vto;
  auto* viterbi = app.add_subcommand("viterbi", "1-best paths of lattices with their own scores");
  add_common(viterbi, common);
  add_scales(viterbi, vto.scales);
  viterbi->add_option("--lattices", vto.lattices, "Directory of .slf files")->required();
  viterbi->add_option("--hyp", vto.hyp, "Transcript file to write");
  viterbi->add_option("--refs", vto.refs, "Reference transcripts for WER");
  viterbi->add_option("--report", vto.report, "Summary file");

  NbestOptions no;
  auto* nb = app.add_subcommand("nbest", "Extract N-best lists from lattices");
  add_common(nb, common);
  add_scales(nb, no.scales);
  nb->add_option("--lattices", no.lattices, "Directory of .slf files")->required();
  nb->add_option("--out", no.out, "Directory for .nbest files")->required();
  nb->add_option("--n", no.n, "Hypotheses per lattice")->capture_default_str();

  RescoreOptions ro;
  auto* rescore = app.add_subcommand("rescore", "Rescore lattices or N-best lists");
  add_common(rescore, common);
  add_lms(rescore, ro.lm);
  add_scales(rescore, ro.scales);
  rescore->add_option("--lattices", ro.lattices, "Directory of .slf files");
  rescore->add_option("--nbest", ro.nbest, "Directory of .nbest files");
  rescore->add_option("--out", ro.out, "Directory for rescored lattices or lists");
  rescore->add_option("--hyp", ro.hyp, "Viterbi 1-best transcript file");
  rescore->add_option("--refs", ro.refs, "Reference transcripts for WER");
  rescore->add_option("--report", ro.report, "Summary file");
  rescore->add_option("--ngram-approx", ro.ngram_approx,
                      "Merge paths agreeing on the last n-1 words (0: no merging)")
      ->capture_default_str();
  rescore->add_option("--beam", ro.beam, "Prune arcs below this log posterior beam first");
  rescore->add_flag("--pre-expand", ro.pre_expand,
                    "Expand with the uni model before pruning (needs --beam)");
  rescore->add_flag("--no-cache", ro.no_cache, "Disable the full-history probability cache");

  TuneOptions tu;
  auto* tune = app.add_subcommand("tune", "Grid search of the interpolation weights");
  add_common(tune, common);
  add_lms(tune, tu.lm);
  add_scales(tune, tu.scales);
  tune->add_option("--objective", tu.objective, "wer (dev lattices) or ppl (text)")
      ->capture_default_str();
  tune->add_option("--lattices", tu.lattices, "Development lattices");
  tune->add_option("--refs", tu.refs, "Development references");
  tune->add_option("--text", tu.text, "Development text for --objective ppl");
  tune->add_option("--n", tu.n, "N-best depth per lattice")->capture_default_str();
  tune->add_option("--step", tu.step, "Grid step for the weights")->capture_default_str();
  tune->add_option("--report", tu.report, "Summary file");

  // Expand --config files into flags ahead of the user's own arguments.
  std::vector<std::string> args;
  try {
    std::vector<std::string> given(argv + 1, argv + argc);
    std::vector<std::string> from_config;
    for (std::size_t i = 0; i < given.size(); ++i) {
      if (given[i] == "--config" && i + 1 < given.size()) {
        auto extra = config_args(given[i + 1]);
        from_config.insert(from_config.end(), extra.begin(), extra.end());
      } else if (given[i].rfind("--config=", 0) == 0) {
        auto extra = config_args(given[i].substr(9));
        from_config.insert(from_config.end(), extra.begin(), extra.end());
      }
    }
    if (!given.empty() && !from_config.empty()) {
      args.push_back(given[0]);
      args.insert(args.end(), from_config.begin(), from_config.end());
      args.insert(args.end(), given.begin() + 1, given.end());
    } else {
      args = given;
    }
  } catch (const surnn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*fixtures) return cmd_fixtures(common, fx);
    if (*vocab) return cmd_vocab(common, vo);
    if (*train) return cmd_train(common, to);
    if (*ppl) return cmd_ppl(common, po);
    if (*viterbi) return cmd_viterbi(common, vto);
    if (*nb) return cmd_nbest(common, no);
    if (*rescore) return cmd_rescore(common, ro);
    if (*tune) return cmd_tune(common, tu);
  } catch (const surnn::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const surnn::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
