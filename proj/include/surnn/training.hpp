#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "surnn/corpus.hpp"
#include "surnn/models.hpp"

namespace surnn {

// A truncated-BPTT window over spliced streams. Cell (t, s) is stored at
// t * streams + s; future windows hold k ids per cell.
struct SequenceSegment {
  Index steps = 0;
  Index streams = 0;
  int k = 0;
  std::vector<WordId> inputs;
  std::vector<WordId> targets;      // kNoTarget where nothing is predicted
  std::vector<std::uint8_t> reset;  // zero the carried state before this cell
  std::vector<WordId> future;       // succeeding words of the target
};

// Cuts spliced streams into windows of at most `bptt` steps. Cells past the
// end of a shorter stream read `pad_id` and carry no target.
std::vector<SequenceSegment> make_segments(const SplicedBatch& batch, std::size_t bptt, int k,
                                           WordId sent_begin, WordId sent_end, WordId pad_id);

struct BatchLoss {
  double loss = 0.0;      // summed negative log-likelihood over output rows
  std::size_t count = 0;  // predicted cells
};

// Forward and backward pass over one segment. `state` (hidden x streams) is
// the carried recurrent state, updated in place. Gradients of the summed
// loss are added into `grad`.
BatchLoss uni_segment_grad(const UniRnnlm& model, const SequenceSegment& seg, Matrix& state,
                           UniRnnlm& grad);
BatchLoss su_segment_grad(const SuRnnlm& model, const SequenceSegment& seg, Matrix& state,
                          SuRnnlm& grad);
// Whole-sentence pass over a NULL-aligned rectangle. NULL cells carry a zero
// state in both directions and receive no gradient.
BatchLoss bi_batch_grad(const BiRnnlm& model, const AlignedNullBatch& batch, BiRnnlm& grad);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  std::size_t words = 0;
  double seconds = 0.0;
  double lr = 0.0;
};

struct TrainConfig {
  int epochs = 12;
  double lr = 1.0;
  double lr_decay = 0.9;  // multiplied into lr after every epoch
  double clip = 5.0;
  std::size_t streams = 8;
  std::size_t bptt = 10;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t words = 0;
  double seconds = 0.0;

  double words_per_second() const { return seconds > 0 ? static_cast<double>(words) / seconds : 0; }
  double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().mean_loss; }
};

TrainReport train_uni(UniRnnlm& model, const TokenizedCorpus& corpus, const TrainConfig& cfg);
TrainReport train_bi(BiRnnlm& model, const TokenizedCorpus& corpus, const TrainConfig& cfg);
TrainReport train_su(SuRnnlm& model, const TokenizedCorpus& corpus, const TrainConfig& cfg);

}  // namespace surnn
