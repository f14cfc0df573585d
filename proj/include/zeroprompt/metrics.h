// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_METRICS_H_
#define ZEROPROMPT_METRICS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zeroprompt/ctc.h"
#include "zeroprompt/engine.h"

namespace zeroprompt {

// One record per processed chunk, prompting or not.
struct PromptRecord {
  std::string utt_id;
  int chunk_index = 0;
  bool is_first_chunk = false;
  bool is_last_chunk = false;
  TokenSeq prompt;
  int committed_len_at_emission = 0;
};

// Raw numerator/denominator pair behind a prompt-error rate.
struct PerPair {
  long pe = 0;  // prompt errors
  long np = 0;  // number of prompts
  // No prompts means no errors; the rate is taken as 0 for comparisons.
  double rate() const { return np > 0 ? static_cast<double>(pe) / static_cast<double>(np) : 0.0; }
};

struct TdtResult {
  int64_t tdt_f_ms = 0;
  int64_t tdt_l_ms = 0;
};

struct MetricsReport {
  // Per-utterance display times; entries are absent for empty hypotheses
  // and excluded from the means.
  std::vector<std::optional<TdtResult>> per_utt_tdt;
  double mean_tdt_f_ms = 0.0;
  double mean_tdt_l_ms = 0.0;
  int tdt_utts = 0;  // utterances contributing to the means

  PerPair per_f, per_l, per_a;
  long total_chunks = 0;  // all processed chunks, prompting or not
  double ppc() const {
    return total_chunks > 0 ? static_cast<double>(per_a.np) / static_cast<double>(total_chunks)
                            : 0.0;
  }

  EditCounts wer_counts;
  long ref_tokens = 0;
  double wer() const {
    return ref_tokens > 0 ? static_cast<double>(wer_counts.total()) / static_cast<double>(ref_tokens)
                          : 0.0;
  }

  double processing_seconds = 0.0;
  double audio_seconds = 0.0;
  double rtf() const { return audio_seconds > 0.0 ? processing_seconds / audio_seconds : 0.0; }
};

// First/Last Token Display Time: the cumulative audio time of the first
// event whose display (committed ++ prompt) is nonempty, and of the first
// event whose display length reaches the final hypothesis length. Absent
// when the final hypothesis is empty.
std::optional<TdtResult> tdt(const Timeline& timeline);

// Position-wise prompt check against the corresponding slice of the final
// hypothesis: NP = |prompt|, PE = mismatches plus positions past the end.
PerPair prompt_errors(const PromptRecord& rec, const TokenSeq& final_hyp);

// One PromptRecord per display event of a causal/zeroprompt timeline.
std::vector<PromptRecord> prompt_records_from_timeline(const Timeline& timeline);

// Corpus aggregation. `refs` aligns with `timelines` by index; records are
// joined to timelines by utterance id. PER-F sums pairs over chunk index 0,
// PER-L over last chunks, PER-A over all chunks; PPC divides total prompts
// by total chunk count; WER sums edit distances over reference length.
MetricsReport aggregate(const std::vector<PromptRecord>& records,
                        const std::vector<Timeline>& timelines,
                        const std::vector<TokenSeq>& refs);

// Corpus word error rate; throws listing the missing ids when hyps/refs do
// not align.
double wer(const std::vector<std::pair<std::string, TokenSeq>>& hyps,
           const std::vector<std::pair<std::string, TokenSeq>>& refs);

// Table formatting. Rates are truncated (not rounded): one decimal for PER
// percentages, two decimals for PPC.
std::string format_per(const PerPair& pair);     // "87 / 2191 = 3.9%"
std::string format_ppc(long np, long chunks);    // "0.20"

// One benchmark configuration and its aggregated metrics.
struct BenchRow {
  int chunk_ms = 0;
  int zp_ms = 0;
  int start_layer = 0;
  bool zp_enabled = false;
  MetricsReport report;
};

// Text report mirroring the benchmark table layout (one row per
// configuration, grouped by chunk size) followed by a raw-count JSON line
// per row for machine diffing. Wall-clock RTF lives only in this raw
// section plus the human table; everything else is byte-reproducible.
std::string render_report(const std::vector<BenchRow>& rows);

}  // namespace zeroprompt

#endif  // ZEROPROMPT_METRICS_H_
