#include <algorithm>

#include "retoksync/core.hpp"
#include "retoksync/errors.hpp"
#include "retoksync/metrics.hpp"

namespace retoksync {
namespace {

using Clock = std::chrono::steady_clock;

std::size_t first_difference(std::span<const TokenId> a, std::span<const TokenId> b) {
  const std::size_t n = std::min(a.size(), b.size());
  std::size_t i = 0;
  while (i < n && a[i] == b[i]) ++i;
  return i;
}

}  // namespace

Sender::Sender(const TokenizerProfile& profile, const Provider& provider, Payload payload,
               TokenSeq context, EmbedConfig config)
    : profile_(&profile), provider_(&provider), payload_(std::move(payload)),
      config_(config), context_len_(context.size()), true_(context), view_(context),
      retok_(profile), records_(provider, config.codec, config.skip_x, context) {
  retok_.append(profile.decode(context));
  if (config_.detection && retok_.tokens() != view_) {
    throw SyncError("context is not in canonical tokenization");
  }
  mask_state_ = records_.result().state;
}

void Sender::step() {
  if (done()) return;
  const auto start = Clock::now();
  const std::size_t t = t_++;

  const Distribution full = provider_->next_distribution(view_);
  ++provider_calls_;
  const Distribution truncated = top_k_truncate(full, config_.codec.top_k);
  const QuantizedDistribution q = quantize(truncated, config_.codec.precision);
  const std::uint64_t mask =
      mask_override_ ? *mask_override_ : mask_for(config_.codec, mask_state_);
  mask_override_.reset();
  EncodedStep enc = enc_step(q, payload_, pointer_, mask);
  pointer_ = enc.next_pointer;
  const TokenId x = enc.outcome.token;

  StepStats stats;
  stats.token = x;
  stats.model_prob = full.prob_of(x);
  stats.kld_bits = step_kld_bits(q, truncated);
  stats.entropy_bits = entropy_bits(q);
  stats.fragment_len = enc.outcome.fragment_len;

  true_.push_back(x);
  retok_.append(profile_->token_bytes(x));

  bool defer = false;
  if (config_.detection) {
    if (config_.anchor_deferral && profile_->is_anchor(x)) {
      defer = true;
      if (config_.buffering && !buffer_.empty()) buffer_.push_back(x);
    } else if (config_.buffering && (!buffer_.empty() || profile_->is_incomplete(x))) {
      buffer_.push_back(x);
      if (classify_utf8(profile_->decode(buffer_)) == Utf8State::kIncomplete) {
        defer = true;
      } else {
        buffer_.clear();
      }
    }
  }

  const std::size_t events_before = events_.size();
  if (!config_.detection || defer) {
    view_.push_back(x);
    records_.push_known(std::move(enc.outcome));
    mask_state_ = records_.result().state;
    pending_ = config_.detection;
    stats.deferred = defer;
  } else {
    stats.retokenized = true;
    full_check(t, &enc.outcome);
    if (config_.check_invariants) check_invariants();
  }
  stats.event = events_.size() > events_before;
  steps_.push_back(stats);
  elapsed_ += Clock::now() - start;
}

void Sender::full_check(std::size_t t, StepOutcome* outcome) {
  TokenSeq pred = view_;
  if (outcome != nullptr) pred.push_back(outcome->token);
  const TokenSeq retok = retok_.tokens();
  pending_ = false;
  if (!detect_ambiguity(pred, retok)) {
    if (outcome != nullptr) {
      view_ = std::move(pred);
      records_.push_known(std::move(*outcome));
      mask_state_ = records_.result().state;
    }
    return;
  }

  const std::size_t diff = first_difference(pred, retok);
  if (diff < context_len_) throw SyncError("generated text re-tokenizes the shared context");

  AmbiguityEvent event;
  event.step = t;
  event.first_diff = diff - context_len_;
  event.pred.assign(pred.begin() + static_cast<std::ptrdiff_t>(diff), pred.end());
  event.retok.assign(retok.begin() + static_cast<std::ptrdiff_t>(diff), retok.end());
  event.pointer_before = pointer_;

  if (config_.reset == ResetMode::kFullRestart) {
    records_ = Extractor(*provider_, config_.codec, config_.skip_x,
                         TokenSeq(retok.begin(), retok.begin() + static_cast<std::ptrdiff_t>(context_len_)));
  } else {
    records_.truncate(std::min(event.first_diff, records_.size()));
  }
  for (std::size_t i = context_len_ + records_.size(); i < retok.size(); ++i) {
    records_.push(retok[i]);
    ++provider_calls_;
  }
  pointer_ = records_.pointer();
  mask_state_ = records_.result().state;
  view_ = retok;
  event.pointer_after = pointer_;
  events_.push_back(std::move(event));
}

void Sender::check_invariants() const {
  const TokenSeq full = profile_->encode(retok_.text());
  if (retok_.tokens() != full) throw DivergenceError("incremental re-tokenization diverged");
  if (pending_) return;
  if (view_ != full) throw DivergenceError("receiver view differs from Tok(Detok(x))");
  const TokenSeq context(view_.begin(), view_.begin() + static_cast<std::ptrdiff_t>(context_len_));
  const ExtractionResult fresh =
      dec(std::span<const TokenId>(view_).subspan(context_len_), context, *provider_,
          config_.codec, config_.skip_x);
  if (fresh.pointer != pointer_ || !(fresh.state == mask_state_)) {
    throw DivergenceError("sender pointer differs from receiver extraction");
  }
  if (!(fresh == records_.result())) throw DivergenceError("cached extraction records diverged");
}

std::vector<FragmentRecord> Sender::build_ledger() const {
  const ExtractionResult& r = records_.result();
  std::vector<FragmentRecord> ledger;
  ledger.reserve(r.steps.size());
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepOutcome& s = r.steps[i];
    FragmentRecord rec;
    rec.token = s.token;
    rec.received = s.fragment;
    rec.intended = s.fragment;
    rec.skipped = s.skipped;
    for (std::size_t b = 0; b < s.fragment_len; ++b) {
      const std::size_t at = r.offsets[i] + b;
      if (at < payload_.size()) rec.intended[b] = payload_.bits()[at];
    }
    ledger.push_back(std::move(rec));
  }
  return ledger;
}

EmbedResult Sender::finish() {
  const auto start = Clock::now();
  if (config_.detection && pending_) {
    full_check(t_, nullptr);
    buffer_.clear();
    if (config_.check_invariants) check_invariants();
  }
  elapsed_ += Clock::now() - start;

  EmbedResult out;
  out.stego_text = retok_.text();
  out.context.assign(true_.begin(), true_.begin() + static_cast<std::ptrdiff_t>(context_len_));
  out.true_sequence = true_;
  out.receiver_view = view_;
  out.events = events_;
  out.ledger = build_ledger();
  out.steps = steps_;
  out.payload_bits = payload_.size();
  out.embedded_bits = pointer_;
  out.provider_calls = provider_calls_;
  out.elapsed = elapsed_;
  return out;
}

EmbedResult embed(const Payload& payload, std::span<const TokenId> context,
                  const TokenizerProfile& profile, const Provider& provider,
                  const EmbedConfig& config) {
  Sender sender(profile, provider, payload, TokenSeq(context.begin(), context.end()), config);
  while (!sender.done()) sender.step();
  return sender.finish();
}

bool detect_ambiguity(std::span<const TokenId> pred, std::span<const TokenId> retok) {
  return !std::equal(pred.begin(), pred.end(), retok.begin(), retok.end());
}

ResetPoint corrective_reset(std::span<const TokenId> retok, std::span<const TokenId> context,
                            const Provider& provider, const CodecParams& params, bool skip_x) {
  const ExtractionResult r = dec(retok, context, provider, params, skip_x);
  return {r.pointer, r.state};
}

ExtractionResult extract(std::string_view stego_text, std::span<const TokenId> context,
                         const TokenizerProfile& profile, const Provider& provider,
                         const CodecParams& params, bool skip_x) {
  const TokenSeq tokens = profile.encode(stego_text);
  if (tokens.size() < context.size() ||
      !std::equal(context.begin(), context.end(), tokens.begin())) {
    throw SyncError("stego text does not start with the shared context");
  }
  return dec(std::span<const TokenId>(tokens).subspan(context.size()), context, provider, params,
             skip_x);
}

AmbiguityTrace ambiguity_trace(const EmbedResult& result) {
  AmbiguityTrace trace;
  trace.ambiguous = !result.events.empty();
  trace.trigger_count = result.events.size();
  trace.token_count = result.generated_tokens();
  return trace;
}

std::vector<bool> event_affected_positions(const EmbedResult& result) {
  const std::size_t n = result.receiver_view.size() - result.context.size();
  std::vector<bool> affected(n, false);
  for (const AmbiguityEvent& e : result.events) {
    const std::size_t end = std::min(n, e.first_diff + e.retok.size());
    for (std::size_t i = e.first_diff; i < end; ++i) affected[i] = true;
  }
  return affected;
}

}  // namespace retoksync
