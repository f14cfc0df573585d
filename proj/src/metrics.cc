// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include "zeroprompt/metrics.h"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace zeroprompt {

std::optional<TdtResult> tdt(const Timeline& timeline) {
  if (timeline.events.empty()) throw std::invalid_argument("tdt: empty timeline");
  if (timeline.final_hyp.empty()) return std::nullopt;
  const size_t final_len = timeline.final_hyp.size();
  std::optional<int64_t> first, last;
  for (const auto& ev : timeline.events) {
    const size_t display_len = ev.committed.size() + ev.prompt.size();
    if (!first && display_len > 0) first = ev.cumulative_ms;
    if (!last && display_len >= final_len) last = ev.cumulative_ms;
    if (first && last) break;
  }
  // The last event's display contains the full final hypothesis, so both
  // times exist whenever the hypothesis is nonempty.
  return TdtResult{*first, *last};
}

PerPair prompt_errors(const PromptRecord& rec, const TokenSeq& final_hyp) {
  PerPair out;
  out.np = static_cast<long>(rec.prompt.size());
  for (size_t i = 0; i < rec.prompt.size(); ++i) {
    const size_t pos = static_cast<size_t>(rec.committed_len_at_emission) + i;
    if (pos >= final_hyp.size() || final_hyp[pos] != rec.prompt[i]) ++out.pe;
  }
  return out;
}

std::vector<PromptRecord> prompt_records_from_timeline(const Timeline& timeline) {
  std::vector<PromptRecord> records;
  const int n = static_cast<int>(timeline.events.size());
  for (int i = 0; i < n; ++i) {
    const auto& ev = timeline.events[i];
    PromptRecord rec;
    rec.utt_id = timeline.utt_id;
    rec.chunk_index = i;
    rec.is_first_chunk = (i == 0);
    rec.is_last_chunk = (i == n - 1);
    rec.prompt = ev.prompt;
    rec.committed_len_at_emission = static_cast<int>(ev.committed.size());
    records.push_back(std::move(rec));
  }
  return records;
}

MetricsReport aggregate(const std::vector<PromptRecord>& records,
                        const std::vector<Timeline>& timelines,
                        const std::vector<TokenSeq>& refs) {
  if (timelines.empty()) throw std::invalid_argument("aggregate: empty corpus");
  if (refs.size() != timelines.size()) {
    throw std::invalid_argument("aggregate: " + std::to_string(timelines.size()) +
                                " timelines vs " + std::to_string(refs.size()) +
                                " references");
  }
  MetricsReport report;

  std::map<std::string, const TokenSeq*> final_by_id;
  for (const auto& tl : timelines) final_by_id[tl.utt_id] = &tl.final_hyp;

  double sum_f = 0.0, sum_l = 0.0;
  for (size_t i = 0; i < timelines.size(); ++i) {
    const auto t = tdt(timelines[i]);
    report.per_utt_tdt.push_back(t);
    if (t) {
      sum_f += static_cast<double>(t->tdt_f_ms);
      sum_l += static_cast<double>(t->tdt_l_ms);
      ++report.tdt_utts;
    }
    const EditCounts ec = edit_distance(timelines[i].final_hyp, refs[i]);
    report.wer_counts.substitutions += ec.substitutions;
    report.wer_counts.deletions += ec.deletions;
    report.wer_counts.insertions += ec.insertions;
    report.ref_tokens += static_cast<long>(refs[i].size());
    report.processing_seconds += timelines[i].processing_seconds;
    report.audio_seconds += timelines[i].audio_seconds;
  }
  if (report.tdt_utts > 0) {
    report.mean_tdt_f_ms = sum_f / report.tdt_utts;
    report.mean_tdt_l_ms = sum_l / report.tdt_utts;
  }

  for (const auto& rec : records) {
    const auto it = final_by_id.find(rec.utt_id);
    if (it == final_by_id.end()) {
      throw std::invalid_argument("aggregate: record for unknown utterance " + rec.utt_id);
    }
    const PerPair pair = prompt_errors(rec, *it->second);
    report.per_a.pe += pair.pe;
    report.per_a.np += pair.np;
    if (rec.is_first_chunk) {
      report.per_f.pe += pair.pe;
      report.per_f.np += pair.np;
    }
    if (rec.is_last_chunk) {
      report.per_l.pe += pair.pe;
      report.per_l.np += pair.np;
    }
  }
  report.total_chunks = static_cast<long>(records.size());
  return report;
}

double wer(const std::vector<std::pair<std::string, TokenSeq>>& hyps,
           const std::vector<std::pair<std::string, TokenSeq>>& refs) {
  std::map<std::string, const TokenSeq*> ref_by_id;
  for (const auto& [id, seq] : refs) ref_by_id[id] = &seq;
  std::string missing;
  long errors = 0, total = 0;
  for (const auto& [id, hyp] : hyps) {
    const auto it = ref_by_id.find(id);
    if (it == ref_by_id.end()) {
      missing += missing.empty() ? id : ", " + id;
      continue;
    }
    errors += edit_distance(hyp, *it->second).total();
    total += static_cast<long>(it->second->size());
  }
  if (!missing.empty()) {
    throw std::invalid_argument("wer: missing references for: " + missing);
  }
  return total > 0 ? static_cast<double>(errors) / static_cast<double>(total) : 0.0;
}

std::string format_per(const PerPair& pair) {
  if (pair.np <= 0) return std::to_string(pair.pe) + " / " + std::to_string(pair.np) + " = 0.0%";
  // Truncated to one decimal of a percentage: pe/np * 1000 integer-divided.
  const long permille = pair.pe * 1000 / pair.np;
  return std::to_string(pair.pe) + " / " + std::to_string(pair.np) + " = " +
         std::to_string(permille / 10) + "." + std::to_string(permille % 10) + "%";
}

std::string format_ppc(long np, long chunks) {
  if (chunks <= 0) return "-";
  const long hundredths = np * 100 / chunks;  // truncated to two decimals
  std::string frac = std::to_string(hundredths % 100);
  if (frac.size() < 2) frac = "0" + frac;
  return std::to_string(hundredths / 100) + "." + frac;
}

namespace {

std::string format_ms(double ms) {
  std::ostringstream ss;
  ss << static_cast<long>(ms + 0.5) << "ms";
  return ss.str();
}

std::string format_fixed(double v, int decimals) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(decimals);
  ss << v;
  return ss.str();
}

}  // namespace

std::string render_report(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  auto emit_row = [&out](const char* c0, const std::string& c1, const std::string& c2,
                         const std::string& c3, const std::string& c4, const std::string& c5,
                         const std::string& c6, const std::string& c7, const std::string& c8,
                         const std::string& c9) {
    out << c0;
    for (const std::string* c : {&c1, &c2, &c3, &c4, &c5, &c6, &c7, &c8, &c9}) {
      out << *c << " | ";
    }
    out << "\n";
  };

  int current_chunk = -1;
  for (const auto& row : rows) {
    if (row.chunk_ms != current_chunk) {
      current_chunk = row.chunk_ms;
      // Total chunk count is shared by every row of one chunk size.
      out << "## " << row.chunk_ms << "ms chunk size with " << row.report.total_chunks
          << " total chunks\n";
      emit_row("| ", "zp", "start_layer", "tdt_f", "tdt_l", "per_f", "per_l", "per_a",
               "wer / rtf", "ppc");
    }
    const auto& r = row.report;
    const bool zp = row.zp_enabled;
    emit_row("| ", std::to_string(row.zp_ms) + "ms",
             zp ? std::to_string(row.start_layer) : "-1", format_ms(r.mean_tdt_f_ms),
             format_ms(r.mean_tdt_l_ms), zp ? format_per(r.per_f) : "-",
             zp ? format_per(r.per_l) : "-", zp ? format_per(r.per_a) : "-",
             format_fixed(r.wer() * 100.0, 2) + " / " + format_fixed(r.rtf(), 5),
             zp ? format_ppc(r.per_a.np, r.total_chunks) : "-");
  }

  out << "\n## raw\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    nlohmann::json j;
    j["chunk_ms"] = row.chunk_ms;
    j["zp_ms"] = row.zp_ms;
    j["start_layer"] = row.zp_enabled ? row.start_layer : -1;
    j["mean_tdt_f_ms"] = r.mean_tdt_f_ms;
    j["mean_tdt_l_ms"] = r.mean_tdt_l_ms;
    j["tdt_utts"] = r.tdt_utts;
    j["per_f"] = {{"pe", r.per_f.pe}, {"np", r.per_f.np}};
    j["per_l"] = {{"pe", r.per_l.pe}, {"np", r.per_l.np}};
    j["per_a"] = {{"pe", r.per_a.pe}, {"np", r.per_a.np}};
    j["total_chunks"] = r.total_chunks;
    j["ppc"] = r.ppc();
    j["wer"] = {{"sub", r.wer_counts.substitutions},
                {"del", r.wer_counts.deletions},
                {"ins", r.wer_counts.insertions},
                {"ref_tokens", r.ref_tokens}};
    j["rtf"] = r.rtf();
    j["processing_seconds"] = r.processing_seconds;
    j["audio_seconds"] = r.audio_seconds;
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace zeroprompt
