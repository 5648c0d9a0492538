// Copyright 2026 The ContFormer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CONTFORMER_DATA_HPP_
#define CONTFORMER_DATA_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "contformer/geometry.hpp"
#include "contformer/tensor.hpp"

namespace contformer::data {

// Reserved token ids. PAD fills batch tails, UNK absorbs out-of-vocabulary
// words.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

struct Vocabulary {
  std::map<std::string, int> token_to_id;  // ids start at 2

  int id_of(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnkId : it->second;
  }
  int size() const { return static_cast<int>(token_to_id.size()) + 2; }
  void add(const std::string& tok) {
    token_to_id.emplace(tok, static_cast<int>(token_to_id.size()) + 2);
  }
};

// Lowercase, split on whitespace and punctuation. Returns the surface tokens;
// pair with Vocabulary::id_of for ids. Throws on sentences with no tokens.
std::vector<std::string> tokenize_words(const std::string& sentence);
std::vector<int> tokenize(const std::string& sentence, const Vocabulary& vocab);

// Inclusive token index range naming one annotated target.
struct EntitySpan {
  int word_start = 0;
  int word_end = 0;
  std::string target_id;
};

struct GroundingSample {
  std::string video_id;
  // Raw frames, shape {T, 3, H_img, W_img}, values in [0, 1]. Either inlined
  // (generated in memory) or loaded from the path recorded in the manifest.
  Tensor frames;
  std::string frames_path;  // relative path when externalized, else empty
  std::string sentence;
  std::vector<int> tokens;
  geom::Tube gt_tube{geom::TemporalSpan{0, 0},
                     {{0, geom::Box{0.5, 0.5, 0.5, 0.5}}}};
  std::string tube_id;
  std::vector<EntitySpan> entity_spans;
  bool trimmed = true;

  std::int64_t num_frames() const { return frames.shape()[0]; }
  std::int64_t image_h() const { return frames.shape()[2]; }
  std::int64_t image_w() const { return frames.shape()[3]; }
};

struct DatasetManifest {
  int schema_version = 1;
  std::string split;
  double fps = 5.0;
  Vocabulary vocab;
  std::vector<GroundingSample> samples;
};

// Line-delimited manifest: a header record followed by one sample record per
// line. Frame tensors live in .npy files next to the manifest.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// Validates every schema invariant; throws std::runtime_error whose message
// names the offending sample and field.
void validate_manifest(const DatasetManifest& m);

// Minimal .npy support for float32 arrays of arbitrary rank. Values are
// converted to/from double at the boundary.
void save_npy(const Tensor& t, const std::string& path);
Tensor load_npy(const std::string& path);

struct SynthSpec {
  int num_videos = 16;
  int num_frames = 8;
  int image_size = 64;
  std::vector<std::string> kinds = {"square", "circle", "triangle"};
  std::vector<std::string> colors = {"red",    "green",   "blue",
                                     "yellow", "magenta", "cyan"};
  int min_distractors = 1;
  int max_distractors = 2;
  bool trimmed = true;
  // Untrimmed mode: the subject is drawn only inside a window of this many
  // frames; the ground-truth span marks it.
  int min_visible = 10;
  int max_visible = 20;
  std::uint64_t seed = 0;
  std::string split = "train";
  double fps = 5.0;
};

// Deterministic synthetic benchmark: colored shapes on a dark canvas moving
// linearly, sentences from fixed templates, entity spans marking the subject
// color+kind tokens. No distractor ever shares the subject's (color, kind).
DatasetManifest synth_generate(const SynthSpec& spec);

SynthSpec synth_spec_from_json_file(const std::string& path);
void synth_spec_to_json_file(const SynthSpec& spec, const std::string& path);

// Padded view of a group of samples. Text is padded with PAD to the longest
// sentence, frames with zero images to the longest clip; masks flag the real
// entries (1 = real).
struct PaddedBatch {
  std::vector<std::int64_t> sample_index;
  std::int64_t max_frames = 0;
  std::int64_t max_tokens = 0;
  std::vector<Tensor> frames;                    // each {max_T, 3, H, W}
  std::vector<std::vector<int>> tokens;          // each length max_L
  std::vector<std::vector<std::uint8_t>> text_mask;
  std::vector<std::vector<std::uint8_t>> frame_mask;
};

PaddedBatch make_batch(const DatasetManifest& m,
                       const std::vector<std::int64_t>& indices);

}  // namespace contformer::data

#endif  // CONTFORMER_DATA_HPP_
