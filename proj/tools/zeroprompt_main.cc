// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
//
// Command-line surface: toy training, streaming decode with mode /
// zero-prompt / start-layer selection, benchmark sweeps, and mask
// inspection. Every run writes a manifest with its resolved configuration
// so outputs are reproducible.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zeroprompt/engine.h"
#include "zeroprompt/io.h"
#include "zeroprompt/metrics.h"
#include "zeroprompt/trainer.h"
#include "zeroprompt/version.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zeroprompt;

namespace {

void write_manifest(const std::string& path, const std::string& command,
                    const json& flags, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["flags"] = flags;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest " + path);
  os << m.dump(2) << "\n";
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for " + path);
}

StreamMode parse_mode(const std::string& mode) {
  if (mode == "causal") return StreamMode::kCausal;
  if (mode == "zeroprompt") return StreamMode::kZeroPrompt;
  if (mode == "lookahead") return StreamMode::kLookAhead;
  throw CLI::ValidationError("--mode", "unknown mode '" + mode + "'");
}

// Ordered parallel map over utterance indices.
template <typename Fn>
void for_each_utt(size_t count, int threads, Fn&& fn) {
  if (threads <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

int cmd_train_toy(const std::string& out_dir, uint64_t seed, int epochs, float lr,
                  int utts, int heldout_utts, int min_tokens, int max_tokens,
                  float noise_std) {
  ToyPreset preset = toy_preset();
  preset.train.seed = seed;
  preset.grammar.seed = seed * 1000003ull + 17;
  preset.train.epochs = epochs;
  preset.train.learning_rate = lr;
  preset.train_utts = utts;
  preset.heldout_utts = heldout_utts;
  preset.min_tokens = min_tokens;
  preset.max_tokens = max_tokens;
  preset.grammar.noise_std = noise_std;

  fs::create_directories(out_dir);
  const Corpus train_set = preset.train_corpus();
  const Corpus heldout = preset.heldout_corpus();

  std::cerr << "training " << preset.encoder.num_layers << "-layer d" << preset.encoder.d_model
            << " encoder on " << train_set.utts.size() << " utterances, "
            << preset.train.epochs << " epochs\n";
  const TrainResult result = train(preset.encoder, train_set, preset.train);
  const Model model{preset.encoder, result.weights};

  const std::string model_path = out_dir + "/model.zpm";
  const std::string train_path = out_dir + "/train.zpc";
  const std::string heldout_path = out_dir + "/heldout.zpc";
  const std::string curve_path = out_dir + "/loss_curve.txt";
  save_model(model, model_path);
  save_corpus(train_set, train_path);
  save_corpus(heldout, heldout_path);
  {
    std::string curve;
    for (size_t e = 0; e < result.loss_curve.size(); ++e) {
      curve += std::to_string(e) + "\t" + std::to_string(result.loss_curve[e]) + "\n";
    }
    write_text(curve_path, curve);
  }

  const double held_wer = greedy_wer(model, heldout);
  std::cout << "final train loss " << result.loss_curve.back() << ", held-out WER "
            << held_wer * 100.0 << "%\n";

  json flags;
  flags["seed"] = seed;
  flags["epochs"] = epochs;
  flags["learning_rate"] = lr;
  flags["utts"] = utts;
  flags["heldout_utts"] = heldout_utts;
  flags["min_tokens"] = min_tokens;
  flags["max_tokens"] = max_tokens;
  flags["noise_std"] = noise_std;
  flags["vocab_size"] = preset.encoder.vocab_size;
  flags["chunk_frames"] = preset.encoder.chunk_frames;
  write_manifest(out_dir + "/manifest.json", "train-toy", flags, {},
                 {model_path, train_path, heldout_path, curve_path});
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& corpus_path,
               const std::string& out_path, int chunk_ms, const std::string& mode_name,
               int zp_ms, int start_layer, int lookahead_ms, int threads) {
  const StreamMode mode = parse_mode(mode_name);
  if (mode != StreamMode::kZeroPrompt && (zp_ms != 0 || start_layer != 0)) {
    std::cerr << "warning: --zp-ms/--start-layer ignored in --mode " << mode_name << "\n";
  }
  const Model model = load_model(model_path);
  const Corpus corpus = load_corpus(corpus_path);
  if (corpus.utts.empty()) throw std::runtime_error("decode: corpus is empty");

  StreamConfig sc;
  sc.chunk_ms = chunk_ms;
  sc.mode = mode;
  sc.zp_ms = zp_ms;
  sc.start_layer = start_layer;
  sc.lookahead_ms = lookahead_ms;

  std::vector<std::string> logs(corpus.utts.size());
  for_each_utt(corpus.utts.size(), threads, [&](size_t i) {
    const Timeline tl = stream_decode(model, corpus.utts[i].feats, sc, corpus.utts[i].id);
    logs[i] = timeline_to_jsonl(tl);
  });
  std::string all;
  for (const auto& log : logs) all += log;

  if (out_path.empty() || out_path == "-") {
    std::cout << all;
  } else {
    write_text(out_path, all);
    json flags;
    flags["chunk_ms"] = chunk_ms;
    flags["mode"] = mode_name;
    flags["zp_ms"] = zp_ms;
    flags["start_layer"] = start_layer;
    flags["lookahead_ms"] = lookahead_ms;
    flags["threads"] = threads;
    write_manifest(out_path + ".manifest.json", "decode", flags, {model_path, corpus_path},
                   {out_path});
  }
  return 0;
}

int cmd_bench(const std::string& model_path, const std::string& corpus_path,
              const std::string& out_path, const std::vector<int>& chunk_ms_list,
              const std::vector<int>& zp_ms_list, const std::vector<int>& layer_list) {
  if (chunk_ms_list.empty() || zp_ms_list.empty()) {
    throw CLI::ValidationError("--chunk-ms/--zp-ms", "sweep lists must be nonempty");
  }
  const Model model = load_model(model_path);
  const Corpus corpus = load_corpus(corpus_path);
  if (corpus.utts.empty()) throw std::runtime_error("bench: corpus is empty");

  std::vector<StreamConfig> configs;
  for (int chunk_ms : chunk_ms_list) {
    for (int zp_ms : zp_ms_list) {
      if (zp_ms == 0) {
        StreamConfig sc;
        sc.chunk_ms = chunk_ms;
        sc.mode = StreamMode::kCausal;
        configs.push_back(sc);
        continue;
      }
      for (int layer : layer_list) {
        StreamConfig sc;
        sc.chunk_ms = chunk_ms;
        sc.mode = layer < 0 ? StreamMode::kCausal : StreamMode::kZeroPrompt;
        sc.zp_ms = zp_ms;
        sc.start_layer = layer;
        configs.push_back(sc);
      }
    }
  }
  const std::vector<BenchRow> rows = evaluate(model, corpus, configs);
  const std::string doc = render_report(rows);
  if (out_path.empty() || out_path == "-") {
    std::cout << doc;
  } else {
    write_text(out_path, doc);
    json flags;
    flags["chunk_ms"] = chunk_ms_list;
    flags["zp_ms"] = zp_ms_list;
    flags["start_layer"] = layer_list;
    flags["threads"] = 1;
    write_manifest(out_path + ".manifest.json", "bench", flags, {model_path, corpus_path},
                   {out_path});
  }
  return 0;
}

int cmd_inspect_mask(int cache, int real, int zp, int block) {
  const AttnMask mask = build_chunk_mask(cache, real, zp, block);
  std::cout << "# " << mask.n_query << " query rows (" << real << " real + " << zp
            << " prompt), " << mask.n_key << " key cols (" << cache << " cache + " << real
            << " real + " << zp << " prompt), block " << block << "\n";
  for (int q = 0; q < mask.n_query; ++q) {
    std::string line;
    for (int k = 0; k < mask.n_key; ++k) line += mask.at(q, k) ? 'x' : '.';
    std::cout << line << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroprompt: chunked streaming CTC decoding with zero-prompt lookahead"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // train-toy
  auto* train_cmd = app.add_subcommand("train-toy", "train the pinned desk-scale model");
  std::string out_dir;
  uint64_t seed = toy_preset().train.seed;
  const ToyPreset defaults = toy_preset();
  int epochs = defaults.train.epochs;
  float lr = defaults.train.learning_rate;
  int utts = defaults.train_utts;
  int heldout_utts = defaults.heldout_utts;
  int min_tokens = defaults.min_tokens;
  int max_tokens = defaults.max_tokens;
  float noise_std = defaults.grammar.noise_std;
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--seed", seed, "training + grammar seed");
  train_cmd->add_option("--epochs", epochs, "epoch budget");
  train_cmd->add_option("--lr", lr, "learning rate");
  train_cmd->add_option("--utts", utts, "training utterances");
  train_cmd->add_option("--heldout-utts", heldout_utts, "held-out utterances");
  train_cmd->add_option("--min-tokens", min_tokens, "shortest utterance");
  train_cmd->add_option("--max-tokens", max_tokens, "longest utterance");
  train_cmd->add_option("--noise-std", noise_std, "feature noise");

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "stream a corpus and log timelines");
  std::string model_path, corpus_path, out_path;
  int chunk_ms = 80, zp_ms = 0, start_layer = 0, lookahead_ms = 0, threads = 1;
  std::string mode_name = "causal";
  decode_cmd->add_option("--model", model_path, "model file")->required();
  decode_cmd->add_option("--corpus", corpus_path, "corpus file")->required();
  decode_cmd->add_option("--out", out_path, "timeline log path ('-' = stdout)");
  decode_cmd->add_option("--chunk-ms", chunk_ms, "chunk duration");
  decode_cmd->add_option("--mode", mode_name, "causal|zeroprompt|lookahead")
      ->check(CLI::IsMember({"causal", "zeroprompt", "lookahead"}));
  decode_cmd->add_option("--zp-ms", zp_ms, "zero-prompt length (zeroprompt mode)");
  decode_cmd->add_option("--start-layer", start_layer,
                         "layer the prompt enters at; -1 disables");
  decode_cmd->add_option("--lookahead-ms", lookahead_ms, "real right context waited for");
  decode_cmd->add_option("--threads", threads, "utterance-parallel workers")
      ->check(CLI::PositiveNumber);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "sweep configurations into a report");
  std::string bench_model, bench_corpus, bench_out;
  std::vector<int> chunk_list, zp_list, layer_list = {0};
  int bench_threads = 1;
  bench_cmd->add_option("--model", bench_model, "model file")->required();
  bench_cmd->add_option("--corpus", bench_corpus, "corpus file")->required();
  bench_cmd->add_option("--out", bench_out, "report path ('-' = stdout)");
  bench_cmd->add_option("--chunk-ms", chunk_list, "chunk sizes to sweep")->required();
  bench_cmd->add_option("--zp-ms", zp_list, "zero-prompt lengths to sweep")->required();
  bench_cmd->add_option("--start-layer", layer_list, "start layers to sweep");
  bench_cmd
      ->add_option("--threads", bench_threads,
                   "wall-clock RTF is measured single-threaded; must be 1")
      ->check(CLI::Range(1, 1));

  // inspect-mask
  auto* mask_cmd = app.add_subcommand("inspect-mask", "print a chunk attention mask");
  int m_cache = 0, m_real = 4, m_zp = 0, m_block = 4;
  mask_cmd->add_option("--cache", m_cache, "history rows")->check(CLI::NonNegativeNumber);
  mask_cmd->add_option("--real", m_real, "real rows")->check(CLI::NonNegativeNumber);
  mask_cmd->add_option("--zp", m_zp, "prompt rows")->check(CLI::NonNegativeNumber);
  mask_cmd->add_option("--block", m_block, "chunk block size")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(train_cmd)) {
      return cmd_train_toy(out_dir, seed, epochs, lr, utts, heldout_utts, min_tokens,
                           max_tokens, noise_std);
    }
    if (app.got_subcommand(decode_cmd)) {
      return cmd_decode(model_path, corpus_path, out_path, chunk_ms, mode_name, zp_ms,
                        start_layer, lookahead_ms, threads);
    }
    if (app.got_subcommand(bench_cmd)) {
      (void)bench_threads;
      return cmd_bench(bench_model, bench_corpus, bench_out, chunk_list, zp_list, layer_list);
    }
    if (app.got_subcommand(mask_cmd)) {
      return cmd_inspect_mask(m_cache, m_real, m_zp, m_block);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
