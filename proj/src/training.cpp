#include "surnn/training.hpp"

#include <chrono>
#include <cmath>

#include "surnn/error.hpp"

namespace surnn {

namespace {

using Clock = std::chrono::steady_clock;

void gather_columns(const Matrix& emb, const WordId* ids, Index n, Matrix& out) {
  out.resize(emb.cols(), n);
  for (Index i = 0; i < n; ++i) out.col(i) = emb.row(ids[i]).transpose();
}

void scatter_rows(Matrix& grad_emb, const WordId* ids, const Matrix& d, WordId skip) {
  for (Index i = 0; i < d.cols(); ++i) {
    if (ids[i] == skip) continue;
    grad_emb.row(ids[i]) += d.col(i).transpose();
  }
}

// Shared body of the uni and su kernels; `future` is null when k == 0.
struct RecurrentView {
  const Matrix& embedding;
  const GruCell& gru;
  const FeedForward* future;
  const OutputLayer& output;
  OutputMap map;
  WordId pad;
};

struct RecurrentGrad {
  Matrix& embedding;
  GruCell& gru;
  FeedForward* future;
  OutputLayer& output;
};

// Softmax cross-entropy over the columns of `context`; fills dcontext and
// accumulates output-layer gradients.
double output_loss_grad(const OutputLayer& out, const OutputMap& map, const Matrix& context,
                        const std::vector<WordId>& targets, OutputLayer& g, Matrix& dcontext) {
  Matrix probs = (out.weight * context).colwise() + out.bias;
  softmax_columns(probs);
  double loss = 0.0;
  for (Index i = 0; i < probs.cols(); ++i) {
    const auto row = static_cast<Index>(map.row(targets[static_cast<std::size_t>(i)]));
    loss -= std::log(probs(row, i));
    probs(row, i) -= 1.0;
  }
  g.weight.noalias() += probs * context.transpose();
  g.bias += probs.rowwise().sum();
  dcontext.noalias() = out.weight.transpose() * probs;
  return loss;
}

BatchLoss recurrent_segment_grad(const RecurrentView& m, const SequenceSegment& seg,
                                 Matrix& state, RecurrentGrad g) {
  const Index S = seg.streams;
  const Index T = seg.steps;
  const Index H = m.gru.hidden_size();
  const Index D = m.embedding.cols();
  const int k = seg.k;
  if (state.rows() != H || state.cols() != S) {
    throw UsageError("carried state has the wrong shape for this segment");
  }

  std::vector<GruTrace> traces(static_cast<std::size_t>(T));
  std::vector<Index> cells;
  std::vector<WordId> targets;
  Matrix x;
  for (Index t = 0; t < T; ++t) {
    const std::size_t base = static_cast<std::size_t>(t * S);
    gather_columns(m.embedding, seg.inputs.data() + base, S, x);
    Matrix h_prev = state;
    for (Index s = 0; s < S; ++s) {
      if (seg.reset[base + static_cast<std::size_t>(s)]) h_prev.col(s).setZero();
    }
    gru_forward(m.gru, x, h_prev, traces[static_cast<std::size_t>(t)]);
    state = traces[static_cast<std::size_t>(t)].h;
    for (Index s = 0; s < S; ++s) {
      const WordId target = seg.targets[base + static_cast<std::size_t>(s)];
      if (target == kNoTarget) continue;
      cells.push_back(t * S + s);
      targets.push_back(target);
    }
  }

  BatchLoss result;
  result.count = cells.size();
  if (cells.empty()) return result;
  const auto n = static_cast<Index>(cells.size());
  const Index F = k > 0 ? m.future->weight.rows() : 0;

  Matrix context(H + F, n);
  for (Index i = 0; i < n; ++i) {
    const Index c = cells[static_cast<std::size_t>(i)];
    context.col(i).head(H) = traces[static_cast<std::size_t>(c / S)].h.col(c % S);
  }
  Matrix fx, fout;
  std::vector<WordId> fids;
  if (k > 0) {
    fids.resize(static_cast<std::size_t>(n * k));
    fx.resize(k * D, n);
    for (Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(cells[static_cast<std::size_t>(i)]);
      for (int j = 0; j < k; ++j) {
        const WordId id = seg.future[c * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)];
        fids[static_cast<std::size_t>(i * k + j)] = id;
        fx.block(j * D, i, D, 1) = m.embedding.row(id).transpose();
      }
    }
    fout = ((m.future->weight * fx).colwise() + m.future->bias).array().tanh().matrix();
    context.bottomRows(F) = fout;
  }

  Matrix dcontext;
  result.loss = output_loss_grad(m.output, m.map, context, targets, g.output, dcontext);

  if (k > 0) {
    const Matrix da = dcontext.bottomRows(F).cwiseProduct(
        (1.0 - fout.array().square()).matrix());
    g.future->weight.noalias() += da * fx.transpose();
    g.future->bias += da.rowwise().sum();
    const Matrix dfx = m.future->weight.transpose() * da;
    for (Index i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const WordId id = fids[static_cast<std::size_t>(i * k + j)];
        if (id == m.pad) continue;
        g.embedding.row(id) += dfx.block(j * D, i, D, 1).transpose();
      }
    }
  }

  Matrix dh_all = Matrix::Zero(H, T * S);
  for (Index i = 0; i < n; ++i) {
    dh_all.col(cells[static_cast<std::size_t>(i)]) = dcontext.col(i).head(H);
  }
  Matrix dh_next = Matrix::Zero(H, S);
  Matrix dx, dh_prev;
  for (Index t = T; t-- > 0;) {
    const std::size_t base = static_cast<std::size_t>(t * S);
    const Matrix dh = dh_all.middleCols(t * S, S) + dh_next;
    gru_backward(m.gru, traces[static_cast<std::size_t>(t)], dh, g.gru, dx, dh_prev);
    scatter_rows(g.embedding, seg.inputs.data() + base, dx, m.pad);
    for (Index s = 0; s < S; ++s) {
      if (seg.reset[base + static_cast<std::size_t>(s)]) dh_prev.col(s).setZero();
    }
    dh_next = dh_prev;
  }
  return result;
}

void scale_grads(const ParamList& grads, double factor) {
  for (const auto& t : grads) {
    for (double& v : t.values()) v *= factor;
  }
}

void check_finite(const ParamList& params, int epoch) {
  if (!all_finite(params)) {
    throw NumericError("non-finite parameter after training epoch " + std::to_string(epoch));
  }
}

void require_corpus(const TokenizedCorpus& corpus, std::size_t vocab_size) {
  if (corpus.sentences.empty()) throw FormatError("empty corpus");
  for (const auto& s : corpus.sentences) {
    for (auto id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        throw UsageError("corpus id " + std::to_string(id) + " outside the model vocabulary");
      }
    }
  }
}

// Shared epoch loop for the spliced-stream architectures.
template <typename Model, typename Kernel>
TrainReport train_spliced(Model& model, const TokenizedCorpus& corpus, const TrainConfig& cfg,
                          int k, Kernel kernel) {
  require_corpus(corpus, model.config.vocab_size);
  const std::size_t streams = std::min(cfg.streams, corpus.sentences.size());
  const auto batch = make_spliced_batches(corpus, streams);
  const auto segments =
      make_segments(batch, cfg.bptt, k, model.config.sent_begin_id(),
                    model.config.sent_end_id(), model.config.pad_id());
  Model grad = model.zeros_like();
  const auto params = model.params();
  const auto grads = grad.params();

  TrainReport report;
  double lr = cfg.lr;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    Matrix state = Matrix::Zero(model.config.hidden, static_cast<Index>(streams));
    double loss = 0.0;
    std::size_t count = 0;
    for (const auto& seg : segments) {
      set_zero(grads);
      const BatchLoss b = kernel(model, seg, state, grad);
      if (b.count == 0) continue;
      loss += b.loss;
      count += b.count;
      scale_grads(grads, 1.0 / static_cast<double>(b.count));
      sgd_step(params, grads, lr, cfg.clip);
    }
    check_finite(params, epoch);
    EpochStats st;
    st.epoch = epoch;
    st.mean_loss = count ? loss / static_cast<double>(count) : 0.0;
    st.words = count;
    st.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    st.lr = lr;
    report.words += count;
    report.seconds += st.seconds;
    report.epochs.push_back(st);
    if (cfg.on_epoch) cfg.on_epoch(st);
    lr *= cfg.lr_decay;
  }
  return report;
}

}  // namespace

std::vector<SequenceSegment> make_segments(const SplicedBatch& batch, std::size_t bptt, int k,
                                           WordId sent_begin, WordId sent_end, WordId pad_id) {
  if (bptt == 0) throw UsageError("bptt length must be at least 1");
  if (k < 0) throw UsageError("number of succeeding words must be non-negative");
  const std::size_t S = batch.num_streams();
  const std::size_t L = batch.max_length();
  const auto uk = static_cast<std::size_t>(k);

  // Position of the sentence end at or after each stream position.
  std::vector<std::vector<std::size_t>> end_at(S);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& stream = batch.streams[s];
    end_at[s].assign(stream.size(), stream.size());
    std::size_t end = stream.size();
    for (std::size_t p = stream.size(); p-- > 0;) {
      if (stream[p] == sent_end) end = p;
      end_at[s][p] = end;
    }
  }

  std::vector<SequenceSegment> out;
  for (std::size_t first = 0; first < L; first += bptt) {
    const std::size_t steps = std::min(bptt, L - first);
    SequenceSegment seg;
    seg.steps = static_cast<Index>(steps);
    seg.streams = static_cast<Index>(S);
    seg.k = k;
    seg.inputs.assign(steps * S, pad_id);
    seg.targets.assign(steps * S, kNoTarget);
    seg.reset.assign(steps * S, 0);
    seg.future.assign(steps * S * uk, pad_id);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        const auto& stream = batch.streams[s];
        const std::size_t p = first + t;
        if (p >= stream.size()) continue;
        const std::size_t cell = t * S + s;
        seg.inputs[cell] = stream[p];
        seg.reset[cell] = stream[p] == sent_begin;
        seg.targets[cell] = batch.step_targets[s][p];
        if (seg.targets[cell] == kNoTarget) continue;
        const std::size_t q = p + 1;  // position of the predicted word
        for (std::size_t j = 0; j < uk; ++j) {
          const std::size_t f = q + 1 + j;
          if (f <= end_at[s][q]) seg.future[cell * uk + j] = stream[f];
        }
      }
    }
    out.push_back(std::move(seg));
  }
  return out;
}

BatchLoss uni_segment_grad(const UniRnnlm& model, const SequenceSegment& seg, Matrix& state,
                           UniRnnlm& grad) {
  if (seg.k != 0) throw UsageError("uni model trained on a segment with future windows");
  RecurrentView view{model.embedding, model.gru, nullptr, model.output,
                     model.config.output_map(), model.config.pad_id()};
  return recurrent_segment_grad(view, seg, state,
                                {grad.embedding, grad.gru, nullptr, grad.output});
}

BatchLoss su_segment_grad(const SuRnnlm& model, const SequenceSegment& seg, Matrix& state,
                          SuRnnlm& grad) {
  if (seg.k != model.config.succ) {
    throw UsageError("segment future width " + std::to_string(seg.k) + " != model k " +
                     std::to_string(model.config.succ));
  }
  const bool has_future = model.config.succ > 0;
  RecurrentView view{model.embedding, model.gru, has_future ? &model.future : nullptr,
                     model.output, model.config.output_map(), model.config.pad_id()};
  return recurrent_segment_grad(view, seg, state,
                                {grad.embedding, grad.gru, has_future ? &grad.future : nullptr,
                                 grad.output});
}

BatchLoss bi_batch_grad(const BiRnnlm& model, const AlignedNullBatch& batch, BiRnnlm& grad) {
  const auto R = static_cast<Index>(batch.num_rows);
  const auto C = static_cast<Index>(batch.num_cols);
  const Index H = model.config.hidden;
  const auto map = model.config.output_map();

  std::vector<WordId> column(static_cast<std::size_t>(R));
  std::vector<std::vector<WordId>> cols(static_cast<std::size_t>(C));
  for (Index c = 0; c < C; ++c) {
    auto& ids = cols[static_cast<std::size_t>(c)];
    ids.resize(static_cast<std::size_t>(R));
    for (Index r = 0; r < R; ++r) {
      ids[static_cast<std::size_t>(r)] =
          batch.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  auto mask_nulls = [&](Matrix& m, Index c) {
    for (Index r = 0; r < R; ++r) {
      if (batch.is_null(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) {
        m.col(r).setZero();
      }
    }
  };

  std::vector<GruTrace> fwd(static_cast<std::size_t>(C)), bwd(static_cast<std::size_t>(C));
  Matrix x;
  Matrix h = Matrix::Zero(H, R);
  for (Index c = 0; c < C; ++c) {
    auto& tr = fwd[static_cast<std::size_t>(c)];
    gather_columns(model.embedding, cols[static_cast<std::size_t>(c)].data(), R, x);
    gru_forward(model.forward, x, h, tr);
    mask_nulls(tr.h, c);
    h = tr.h;
  }
  h.setZero();
  for (Index c = C; c-- > 0;) {
    auto& tr = bwd[static_cast<std::size_t>(c)];
    gather_columns(model.embedding, cols[static_cast<std::size_t>(c)].data(), R, x);
    gru_forward(model.backward, x, h, tr);
    mask_nulls(tr.h, c);
    h = tr.h;
  }

  // Predicted cells in (column, row) order.
  std::vector<std::pair<Index, Index>> cells;
  std::vector<WordId> targets;
  for (Index c = 1; c < C; ++c) {
    for (Index r = 0; r < R; ++r) {
      if (batch.is_null(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
      cells.emplace_back(c, r);
      targets.push_back(cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)]);
    }
  }
  BatchLoss result;
  result.count = cells.size();
  if (cells.empty()) return result;
  const auto n = static_cast<Index>(cells.size());
  Matrix context = Matrix::Zero(2 * H, n);
  for (Index i = 0; i < n; ++i) {
    const auto [c, r] = cells[static_cast<std::size_t>(i)];
    context.col(i).head(H) = fwd[static_cast<std::size_t>(c - 1)].h.col(r);
    if (c + 1 < C) context.col(i).tail(H) = bwd[static_cast<std::size_t>(c + 1)].h.col(r);
  }
  Matrix dcontext;
  result.loss = output_loss_grad(model.output, map, context, targets, grad.output, dcontext);

  Matrix dfwd = Matrix::Zero(H, C * R), dbwd = Matrix::Zero(H, C * R);
  for (Index i = 0; i < n; ++i) {
    const auto [c, r] = cells[static_cast<std::size_t>(i)];
    dfwd.col((c - 1) * R + r) += dcontext.col(i).head(H);
    if (c + 1 < C) dbwd.col((c + 1) * R + r) += dcontext.col(i).tail(H);
  }
  const WordId null_id = model.config.null_id();
  Matrix dh_next = Matrix::Zero(H, R), dx, dh_prev;
  for (Index c = C; c-- > 0;) {
    Matrix dh = dfwd.middleCols(c * R, R) + dh_next;
    mask_nulls(dh, c);
    gru_backward(model.forward, fwd[static_cast<std::size_t>(c)], dh, grad.forward, dx, dh_prev);
    scatter_rows(grad.embedding, cols[static_cast<std::size_t>(c)].data(), dx, null_id);
    dh_next = dh_prev;
  }
  dh_next.setZero();
  for (Index c = 0; c < C; ++c) {
    Matrix dh = dbwd.middleCols(c * R, R) + dh_next;
    mask_nulls(dh, c);
    gru_backward(model.backward, bwd[static_cast<std::size_t>(c)], dh, grad.backward, dx,
                 dh_prev);
    scatter_rows(grad.embedding, cols[static_cast<std::size_t>(c)].data(), dx, null_id);
    dh_next = dh_prev;
  }
  return result;
}

TrainReport train_uni(UniRnnlm& model, const TokenizedCorpus& corpus, const TrainConfig& cfg) {
  return train_spliced(model, corpus, cfg, 0, uni_segment_grad);
}

TrainReport train_su(SuRnnlm& model, const TokenizedCorpus& corpus, const TrainConfig& cfg) {
  return train_spliced(model, corpus, cfg, model.config.succ, su_segment_grad);
}

TrainReport train_bi(BiRnnlm& model, const TokenizedCorpus& corpus, const TrainConfig& cfg) {
  require_corpus(corpus, model.config.vocab_size);
  const std::size_t streams = std::min(cfg.streams, corpus.sentences.size());
  const auto batches = make_null_aligned_batches(corpus, streams, model.config.null_id());
  BiRnnlm grad = model.zeros_like();
  const auto params = model.params();
  const auto grads = grad.params();

  TrainReport report;
  double lr = cfg.lr;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    double loss = 0.0;
    std::size_t count = 0;
    for (const auto& b : batches) {
      set_zero(grads);
      const BatchLoss bl = bi_batch_grad(model, b, grad);
      if (bl.count == 0) continue;
      loss += bl.loss;
      count += bl.count;
      scale_grads(grads, 1.0 / static_cast<double>(bl.count));
      sgd_step(params, grads, lr, cfg.clip);
    }
    check_finite(params, epoch);
    EpochStats st;
    st.epoch = epoch;
    st.mean_loss = count ? loss / static_cast<double>(count) : 0.0;
    st.words = count;
    st.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    st.lr = lr;
    report.words += count;
    report.seconds += st.seconds;
    report.epochs.push_back(st);
    if (cfg.on_epoch) cfg.on_epoch(st);
    lr *= cfg.lr_decay;
  }
  return report;
}

}  // namespace surnn
