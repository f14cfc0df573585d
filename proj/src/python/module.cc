// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "zeroprompt/ctc.h"
#include "zeroprompt/encoder.h"
#include "zeroprompt/engine.h"
#include "zeroprompt/io.h"
#include "zeroprompt/linalg.h"
#include "zeroprompt/metrics.h"
#include "zeroprompt/trainer.h"
#include "zeroprompt/version.h"

namespace py = pybind11;
using namespace zeroprompt;

namespace {

Matrix matrix_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d float array");
  Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(m.data.data(), a.data(), m.data.size() * sizeof(float));
  return m;
}

py::array_t<float> array_from_matrix(const Matrix& m) {
  py::array_t<float> a({m.rows, m.cols});
  std::memcpy(a.mutable_data(), m.data.data(), m.data.size() * sizeof(float));
  return a;
}

AttnMask mask_from_array(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d bool array");
  AttnMask mask(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const bool* p = a.data();
  for (size_t i = 0; i < mask.allowed.size(); ++i) mask.allowed[i] = p[i] ? 1 : 0;
  return mask;
}

py::array_t<bool> array_from_mask(const AttnMask& mask) {
  py::array_t<bool> a({mask.n_query, mask.n_key});
  bool* p = a.mutable_data();
  for (size_t i = 0; i < mask.allowed.size(); ++i) p[i] = mask.allowed[i] != 0;
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Chunked streaming CTC decoding with zero-prompt lookahead";
  m.attr("__version__") = kVersion;
  m.attr("BLANK_ID") = kBlankId;

  // linalg
  m.def("matmul", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                     const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
    return array_from_matrix(matmul(matrix_from_array(a), matrix_from_array(b)));
  });
  m.def("masked_attention",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& q,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& k,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& v,
           const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
           float scale) {
          return array_from_matrix(masked_attention(matrix_from_array(q), matrix_from_array(k),
                                                    matrix_from_array(v), mask_from_array(mask),
                                                    scale));
        },
        py::arg("q"), py::arg("k"), py::arg("v"), py::arg("mask"), py::arg("scale"));
  m.def("layer_norm",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
           const std::vector<float>& gamma, const std::vector<float>& beta, float eps) {
          return array_from_matrix(layer_norm(matrix_from_array(x), gamma, beta, eps));
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("eps") = 1e-5f);
  m.def("log_softmax",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
          return array_from_matrix(log_softmax(matrix_from_array(x)));
        });

  // encoder
  py::class_<EncoderConfig>(m, "EncoderConfig")
      .def(py::init<>())
      .def_readwrite("num_layers", &EncoderConfig::num_layers)
      .def_readwrite("d_model", &EncoderConfig::d_model)
      .def_readwrite("n_heads", &EncoderConfig::n_heads)
      .def_readwrite("ffn_dim", &EncoderConfig::ffn_dim)
      .def_readwrite("vocab_size", &EncoderConfig::vocab_size)
      .def_readwrite("feat_dim", &EncoderConfig::feat_dim)
      .def_readwrite("frame_ms", &EncoderConfig::frame_ms)
      .def_readwrite("subsample", &EncoderConfig::subsample)
      .def_readwrite("chunk_frames", &EncoderConfig::chunk_frames)
      .def_readwrite("left_chunks", &EncoderConfig::left_chunks);
  py::class_<ZeroPromptSpec>(m, "ZeroPromptSpec")
      .def(py::init([](int zp_frames, int start_layer) {
             return ZeroPromptSpec{zp_frames, start_layer};
           }),
           py::arg("zp_frames") = 0, py::arg("start_layer") = 0)
      .def_readwrite("zp_frames", &ZeroPromptSpec::zp_frames)
      .def_readwrite("start_layer", &ZeroPromptSpec::start_layer)
      .def("enabled", &ZeroPromptSpec::enabled);
  py::class_<AttentionCache>(m, "AttentionCache")
      .def(py::init<>())
      .def_property_readonly("cached_rows", &AttentionCache::cached_rows)
      .def_readonly("rows_consumed", &AttentionCache::rows_consumed);
  py::class_<Model>(m, "Model")
      .def(py::init<>())
      .def_readwrite("cfg", &Model::cfg);
  py::class_<ChunkOutput>(m, "ChunkOutput")
      .def_property_readonly("logprobs_real",
                             [](const ChunkOutput& o) { return array_from_matrix(o.logprobs_real); })
      .def_property_readonly("logprobs_zp",
                             [](const ChunkOutput& o) { return array_from_matrix(o.logprobs_zp); })
      .def_readonly("cache", &ChunkOutput::cache);

  m.def("build_chunk_mask", [](int n_cache, int n_real, int n_zp, int block) {
    return array_from_mask(build_chunk_mask(n_cache, n_real, n_zp, block));
  });
  m.def("random_model", [](const EncoderConfig& cfg, uint64_t seed) {
    return Model{cfg, init_weights(cfg, seed)};
  });
  m.def("forward_chunk",
        [](const Model& model, const AttentionCache& cache,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& feats,
           const ZeroPromptSpec& zp) {
          return forward_chunk(model.cfg, model.weights, cache, matrix_from_array(feats), zp);
        },
        py::arg("model"), py::arg("cache"), py::arg("feats"), py::arg("zp"));
  m.def("forward_offline",
        [](const Model& model,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& feats) {
          return array_from_matrix(forward_offline(model.cfg, model.weights,
                                                   matrix_from_array(feats)));
        });
  m.def("load_model", &load_model);
  m.def("save_model", &save_model);

  // ctc
  m.def("greedy_collapse",
        [](const std::vector<int>& ids) { return greedy_collapse(ids); });
  m.def("ctc_loss",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logprobs,
           const TokenSeq& target) { return ctc_loss(matrix_from_array(logprobs), target); });
  m.def("ctc_grad",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logprobs,
           const TokenSeq& target) {
          const CtcGrad g = ctc_grad(matrix_from_array(logprobs), target);
          return py::make_tuple(array_from_matrix(g.grad), g.loss, g.feasible);
        });
  m.def("edit_distance", [](const TokenSeq& hyp, const TokenSeq& ref) {
    const EditCounts c = edit_distance(hyp, ref);
    return py::make_tuple(c.substitutions, c.deletions, c.insertions);
  });

  // engine
  py::enum_<StreamMode>(m, "StreamMode")
      .value("CAUSAL", StreamMode::kCausal)
      .value("ZEROPROMPT", StreamMode::kZeroPrompt)
      .value("LOOKAHEAD", StreamMode::kLookAhead);
  py::class_<StreamConfig>(m, "StreamConfig")
      .def(py::init<>())
      .def_readwrite("chunk_ms", &StreamConfig::chunk_ms)
      .def_readwrite("mode", &StreamConfig::mode)
      .def_readwrite("zp_ms", &StreamConfig::zp_ms)
      .def_readwrite("start_layer", &StreamConfig::start_layer)
      .def_readwrite("lookahead_ms", &StreamConfig::lookahead_ms);
  py::class_<DisplayEvent>(m, "DisplayEvent")
      .def_readonly("cumulative_ms", &DisplayEvent::cumulative_ms)
      .def_readonly("committed", &DisplayEvent::committed)
      .def_readonly("prompt", &DisplayEvent::prompt);
  py::class_<Timeline>(m, "Timeline")
      .def_readonly("utt_id", &Timeline::utt_id)
      .def_readonly("events", &Timeline::events)
      .def_readonly("final_hyp", &Timeline::final_hyp)
      .def_readonly("processing_seconds", &Timeline::processing_seconds)
      .def_readonly("audio_seconds", &Timeline::audio_seconds);
  m.def("stream_decode",
        [](const Model& model,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& feats,
           const StreamConfig& cfg, const std::string& utt_id) {
          return stream_decode(model, matrix_from_array(feats), cfg, utt_id);
        },
        py::arg("model"), py::arg("feats"), py::arg("cfg"), py::arg("utt_id") = "utt");
  m.def("tokens_to_text", &tokens_to_text);
  m.def("timeline_to_jsonl", &timeline_to_jsonl);

  // metrics
  py::class_<TdtResult>(m, "TdtResult")
      .def_readonly("tdt_f_ms", &TdtResult::tdt_f_ms)
      .def_readonly("tdt_l_ms", &TdtResult::tdt_l_ms);
  m.def("tdt", [](const Timeline& tl) -> py::object {
    const auto t = tdt(tl);
    if (!t) return py::none();
    return py::cast(*t);
  });
  m.def("format_per", [](long pe, long np) { return format_per(PerPair{pe, np}); });
  m.def("format_ppc", &format_ppc);

  // trainer
  py::class_<SyntheticGrammar>(m, "SyntheticGrammar")
      .def_readwrite("vocab_size", &SyntheticGrammar::vocab_size)
      .def_readwrite("frames_per_token", &SyntheticGrammar::frames_per_token)
      .def_readwrite("lead_silence_frames", &SyntheticGrammar::lead_silence_frames)
      .def_readwrite("trail_silence_frames", &SyntheticGrammar::trail_silence_frames)
      .def_readwrite("noise_std", &SyntheticGrammar::noise_std)
      .def_readwrite("seed", &SyntheticGrammar::seed);
  m.def("default_grammar", &default_grammar, py::arg("vocab_size"), py::arg("feat_dim"),
        py::arg("seed"), py::arg("branches") = 2, py::arg("spread") = 0.05f);
  m.def("gen_corpus",
        [](const SyntheticGrammar& g, int n_utts, int min_tokens, int max_tokens) {
          const Corpus c = gen_corpus(g, n_utts, min_tokens, max_tokens);
          py::list out;
          for (const auto& u : c.utts) {
            py::dict d;
            d["id"] = u.id;
            d["reference"] = u.reference;
            d["feats"] = array_from_matrix(u.feats);
            out.append(d);
          }
          return out;
        });
  m.def("train_toy",
        [](uint64_t seed, int epochs) {
          ToyPreset preset = toy_preset();
          preset.train.seed = seed;
          if (epochs > 0) preset.train.epochs = epochs;
          const TrainResult r = train(preset.encoder, preset.train_corpus(), preset.train);
          Model model{preset.encoder, r.weights};
          return py::make_tuple(model, r.loss_curve);
        },
        py::arg("seed"), py::arg("epochs") = 0);
}
