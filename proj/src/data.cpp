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

#include "contformer/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "contformer/rng.hpp"

namespace contformer::data {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// tokenizer

std::vector<std::string> tokenize_words(const std::string& sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : sentence) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  if (out.empty())
    throw std::invalid_argument("tokenize: sentence has no tokens");
  return out;
}

std::vector<int> tokenize(const std::string& sentence,
                          const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : tokenize_words(sentence)) ids.push_back(vocab.id_of(w));
  return ids;
}

// ---------------------------------------------------------------------------
// npy

void save_npy(const Tensor& t, const std::string& path) {
  std::ostringstream shape;
  shape << "(";
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    shape << t.shape()[i];
    if (t.shape().size() == 1 || i + 1 < t.shape().size()) shape << ", ";
  }
  shape << ")";
  std::string head = "{'descr': '<f4', 'fortran_order': False, 'shape': " +
                     shape.str() + ", }";
  // magic(6) + version(2) + headerlen(2) + header, padded to 64 bytes
  std::size_t total = 10 + head.size() + 1;
  head.append(64 - (total % 64 == 0 ? 64 : total % 64), ' ');
  head.push_back('\n');

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_npy: cannot open " + path);
  f.write("\x93NUMPY\x01\x00", 8);
  const std::uint16_t hlen = static_cast<std::uint16_t>(head.size());
  f.write(reinterpret_cast<const char*>(&hlen), 2);
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  std::vector<float> buf(static_cast<std::size_t>(t.numel()));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    buf[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw std::runtime_error("save_npy: write failed for " + path);
}

Tensor load_npy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_npy: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw std::runtime_error("load_npy: bad magic in " + path);
  const int major = magic[6];
  std::uint32_t hlen = 0;
  if (major == 1) {
    std::uint16_t h16 = 0;
    f.read(reinterpret_cast<char*>(&h16), 2);
    hlen = h16;
  } else {
    f.read(reinterpret_cast<char*>(&hlen), 4);
  }
  std::string head(hlen, '\0');
  f.read(head.data(), hlen);
  if (!f) throw std::runtime_error("load_npy: truncated header in " + path);

  const bool f4 = head.find("'<f4'") != std::string::npos;
  const bool f8 = head.find("'<f8'") != std::string::npos;
  if (!f4 && !f8)
    throw std::runtime_error("load_npy: unsupported dtype in " + path);
  if (head.find("'fortran_order': False") == std::string::npos)
    throw std::runtime_error("load_npy: fortran order unsupported: " + path);

  const auto lp = head.find('(');
  const auto rp = head.find(')', lp);
  if (lp == std::string::npos || rp == std::string::npos)
    throw std::runtime_error("load_npy: malformed shape in " + path);
  std::vector<std::int64_t> shape;
  std::string num;
  for (std::size_t i = lp + 1; i < rp; ++i) {
    if (std::isdigit(static_cast<unsigned char>(head[i]))) {
      num.push_back(head[i]);
    } else if (!num.empty()) {
      shape.push_back(std::stoll(num));
      num.clear();
    }
  }
  if (!num.empty()) shape.push_back(std::stoll(num));
  if (shape.empty()) shape = {1};

  Tensor t(shape);
  if (f4) {
    std::vector<float> buf(static_cast<std::size_t>(t.numel()));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t[i] = buf[static_cast<std::size_t>(i)];
  } else {
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("load_npy: truncated data in " + path);
  return t;
}

// ---------------------------------------------------------------------------
// manifest

namespace {

json tube_to_json(const geom::Tube& tube, const std::string& id) {
  json boxes = json::object();
  for (const auto& [t, b] : tube.boxes())
    boxes[std::to_string(t)] = {b.cx, b.cy, b.w, b.h};
  return {{"id", id},
          {"start", tube.span().start_frame},
          {"end", tube.span().end_frame},
          {"boxes", boxes}};
}

geom::Tube tube_from_json(const json& j) {
  std::map<std::int64_t, geom::Box> boxes;
  for (const auto& [k, v] : j.at("boxes").items()) {
    geom::Box b{v.at(0).get<double>(), v.at(1).get<double>(),
                v.at(2).get<double>(), v.at(3).get<double>()};
    boxes[std::stoll(k)] = b;
  }
  return geom::Tube({j.at("start").get<std::int64_t>(),
                     j.at("end").get<std::int64_t>()},
                    std::move(boxes));
}

}  // namespace

void save_manifest(const DatasetManifest& m, const std::string& path) {
  const fs::path dir = fs::path(path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_manifest: cannot open " + path);

  json vocab = json::object();
  for (const auto& [tok, id] : m.vocab.token_to_id) vocab[tok] = id;
  json header = {{"schema_version", m.schema_version},
                 {"split", m.split},
                 {"fps", m.fps},
                 {"num_samples", m.samples.size()},
                 {"vocab", vocab}};
  f << header.dump() << "\n";

  for (const auto& s : m.samples) {
    const std::string rel =
        s.frames_path.empty() ? s.video_id + ".npy" : s.frames_path;
    save_npy(s.frames, (dir / rel).string());
    json spans = json::array();
    for (const auto& e : s.entity_spans)
      spans.push_back({{"start", e.word_start},
                       {"end", e.word_end},
                       {"target", e.target_id}});
    json rec = {{"video_id", s.video_id},
                {"frames", rel},
                {"sentence", s.sentence},
                {"tokens", s.tokens},
                {"trimmed", s.trimmed},
                {"tube", tube_to_json(s.gt_tube, s.tube_id)},
                {"entity_spans", spans}};
    f << rec.dump() << "\n";
  }
  if (!f) throw std::runtime_error("save_manifest: write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
  const fs::path dir = fs::path(path).parent_path();

  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("load_manifest: empty file " + path);
  json header = json::parse(line);
  DatasetManifest m;
  m.schema_version = header.at("schema_version").get<int>();
  if (m.schema_version != 1)
    throw std::runtime_error("load_manifest: unsupported schema_version " +
                             std::to_string(m.schema_version));
  m.split = header.at("split").get<std::string>();
  m.fps = header.at("fps").get<double>();
  for (const auto& [tok, id] : header.at("vocab").items())
    m.vocab.token_to_id[tok] = id.get<int>();

  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    GroundingSample s;
    s.video_id = rec.at("video_id").get<std::string>();
    s.frames_path = rec.at("frames").get<std::string>();
    s.frames = load_npy((dir / s.frames_path).string());
    s.sentence = rec.at("sentence").get<std::string>();
    s.tokens = rec.at("tokens").get<std::vector<int>>();
    s.trimmed = rec.at("trimmed").get<bool>();
    s.tube_id = rec.at("tube").at("id").get<std::string>();
    s.gt_tube = tube_from_json(rec.at("tube"));
    for (const auto& e : rec.at("entity_spans")) {
      s.entity_spans.push_back({e.at("start").get<int>(),
                                e.at("end").get<int>(),
                                e.at("target").get<std::string>()});
    }
    m.samples.push_back(std::move(s));
  }
  validate_manifest(m);
  return m;
}

void validate_manifest(const DatasetManifest& m) {
  auto fail = [](const std::string& id, const std::string& what) {
    throw std::runtime_error("manifest validation: sample '" + id + "': " +
                             what);
  };
  if (m.schema_version != 1)
    throw std::runtime_error("manifest validation: unsupported schema version " +
                             std::to_string(m.schema_version));
  if (m.fps <= 0.0)
    throw std::runtime_error("manifest validation: fps must be positive");
  for (const auto& s : m.samples) {
    if (s.frames.shape().size() != 4 || s.frames.shape()[1] != 3)
      fail(s.video_id, "frames must have shape {T, 3, H, W}");
    const std::int64_t T_ = s.num_frames();
    if (T_ < 1) fail(s.video_id, "needs at least one frame");
    if (!s.frames.all_finite()) fail(s.video_id, "non-finite frame values");
    if (s.tokens.empty()) fail(s.video_id, "empty token sequence");
    const int L = static_cast<int>(s.tokens.size());
    for (int id : s.tokens)
      if (id < 0 || id >= m.vocab.size())
        fail(s.video_id, "token id out of vocabulary range");
    for (const auto& w : tokenize_words(s.sentence))
      if (m.vocab.id_of(w) == kUnkId)
        fail(s.video_id, "vocabulary does not cover token '" + w + "'");
    if (s.gt_tube.span().start_frame < 0 ||
        s.gt_tube.span().end_frame >= T_)
      fail(s.video_id, "tube span outside the video");
    if (s.trimmed &&
        (s.gt_tube.span().start_frame != 0 ||
         s.gt_tube.span().end_frame != T_ - 1))
      fail(s.video_id, "trimmed sample must span all frames");
    for (const auto& e : s.entity_spans) {
      if (e.word_start < 0 || e.word_start > e.word_end || e.word_end >= L)
        fail(s.video_id, "entity span word range invalid");
      if (e.target_id != s.tube_id)
        fail(s.video_id, "entity span target '" + e.target_id +
                             "' does not resolve to a tube");
    }
  }
}

// ---------------------------------------------------------------------------
// synthetic benchmark

namespace {

struct Rgb {
  double r, g, b;
};

Rgb color_rgb(const std::string& name) {
  if (name == "red") return {0.90, 0.12, 0.10};
  if (name == "green") return {0.10, 0.80, 0.15};
  if (name == "blue") return {0.15, 0.25, 0.90};
  if (name == "yellow") return {0.92, 0.86, 0.10};
  if (name == "magenta") return {0.85, 0.10, 0.80};
  if (name == "cyan") return {0.10, 0.80, 0.85};
  throw std::invalid_argument("unknown color: " + name);
}

struct Shape {
  std::string kind;
  std::string color;
  double half = 0.1;            // half-extent, normalized
  double x0, y0, x1, y1;        // endpoint centers of the linear track
  std::int64_t vis_start = 0;   // visibility window, inclusive
  std::int64_t vis_end = 0;

  geom::Box box_at(std::int64_t t, std::int64_t T) const {
    const double a = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
    return geom::Box{x0 + (x1 - x0) * a, y0 + (y1 - y0) * a, 2.0 * half,
                     2.0 * half};
  }
  bool covers(double px, double py, const geom::Box& b) const {
    const double dx = px - b.cx, dy = py - b.cy;
    if (kind == "square") return std::fabs(dx) <= half && std::fabs(dy) <= half;
    if (kind == "circle") return dx * dx + dy * dy <= half * half;
    // upward triangle with vertices (cx, cy-h), (cx-h, cy+h), (cx+h, cy+h)
    if (dy < -half || dy > half) return false;
    const double frac = (dy + half) / (2.0 * half);  // 0 at apex
    return std::fabs(dx) <= half * frac;
  }
};

// Picks a linear track whose dominant axis matches `dir` and keeps the shape
// fully inside the canvas at both endpoints.
Shape make_track(Rng& rng, const std::string& kind, const std::string& color,
                 const std::string& dir) {
  Shape s;
  s.kind = kind;
  s.color = color;
  s.half = rng.uniform(0.09, 0.14);
  const double lo = s.half + 0.02, hi = 1.0 - s.half - 0.02;
  const double len = rng.uniform(0.25, std::min(0.55, hi - lo));
  const double jit = rng.uniform(-0.06, 0.06);
  double ax0, ax1;  // dominant axis endpoints
  ax0 = rng.uniform(lo, hi - len);
  ax1 = ax0 + len;
  if (dir == "left" || dir == "up") std::swap(ax0, ax1);
  double c = rng.uniform(lo + 0.06, hi - 0.06);
  double cx0 = c - jit / 2, cx1 = c + jit / 2;
  if (dir == "left" || dir == "right") {
    s.x0 = ax0; s.x1 = ax1; s.y0 = cx0; s.y1 = cx1;
  } else {
    s.y0 = ax0; s.y1 = ax1; s.x0 = cx0; s.x1 = cx1;
  }
  return s;
}

void render(Tensor& frames, std::int64_t t, const std::vector<Shape>& order,
            std::int64_t S, std::int64_t T) {
  const double bg = 0.08;
  double* base = frames.data() + t * 3 * S * S;
  for (std::int64_t py = 0; py < S; ++py) {
    for (std::int64_t px = 0; px < S; ++px) {
      const double x = (px + 0.5) / static_cast<double>(S);
      const double y = (py + 0.5) / static_cast<double>(S);
      Rgb c{bg, bg, bg};
      for (const Shape& sh : order) {
        if (t < sh.vis_start || t > sh.vis_end) continue;
        if (sh.covers(x, y, sh.box_at(t, T))) c = color_rgb(sh.color);
      }
      base[0 * S * S + py * S + px] = c.r;
      base[1 * S * S + py * S + px] = c.g;
      base[2 * S * S + py * S + px] = c.b;
    }
  }
}

}  // namespace

DatasetManifest synth_generate(const SynthSpec& spec) {
  if (spec.num_videos < 1 || spec.num_frames < 1 || spec.image_size < 8)
    throw std::invalid_argument("synth_generate: degenerate spec");
  if (spec.kinds.empty() || spec.colors.empty())
    throw std::invalid_argument("synth_generate: empty shape inventory");
  static const std::vector<std::string> kDirs = {"left", "right", "up", "down"};

  DatasetManifest m;
  m.split = spec.split;
  m.fps = spec.fps;

  Rng root(spec.seed);
  std::set<std::string> all_tokens;
  const std::int64_t T = spec.num_frames, S = spec.image_size;

  for (int v = 0; v < spec.num_videos; ++v) {
    Rng rng = root.fork(static_cast<std::uint64_t>(v) + 1);
    GroundingSample s;
    {
      std::ostringstream id;
      id << spec.split << "_" << v;
      s.video_id = id.str();
    }
    s.trimmed = spec.trimmed;
    s.tube_id = "t0";

    const std::string kind =
        spec.kinds[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(spec.kinds.size()) - 1))];
    const std::string color =
        spec.colors[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(spec.colors.size()) - 1))];
    const std::string dir =
        kDirs[static_cast<std::size_t>(rng.uniform_int(0, 3))];

    Shape subject = make_track(rng, kind, color, dir);
    subject.vis_start = 0;
    subject.vis_end = T - 1;
    if (!spec.trimmed) {
      const std::int64_t len = std::min<std::int64_t>(
          T, rng.uniform_int(spec.min_visible, spec.max_visible));
      subject.vis_start = rng.uniform_int(0, T - len);
      subject.vis_end = subject.vis_start + len - 1;
    }

    std::vector<Shape> order;  // draw order, subject last (on top)
    const int nd = static_cast<int>(
        rng.uniform_int(spec.min_distractors, spec.max_distractors));
    for (int d = 0; d < nd; ++d) {
      std::string dk, dc;
      do {
        dk = spec.kinds[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(spec.kinds.size()) - 1))];
        dc = spec.colors[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(spec.colors.size()) - 1))];
      } while (dk == kind && dc == color);  // referent stays unique
      Shape dtr = make_track(
          rng, dk, dc, kDirs[static_cast<std::size_t>(rng.uniform_int(0, 3))]);
      dtr.vis_start = 0;
      dtr.vis_end = T - 1;
      order.push_back(dtr);
    }
    order.push_back(subject);

    // sentence + entity span covering the color and kind tokens
    const std::int64_t tpl = rng.uniform_int(0, order.size() > 1 ? 2 : 1);
    int span_start = 0;
    if (tpl == 0) {
      s.sentence = "the " + color + " " + kind + " moving " + dir;
      span_start = 1;
    } else if (tpl == 1) {
      s.sentence = "watch the " + color + " " + kind + " as it moves " + dir;
      span_start = 2;
    } else {
      const Shape& d0 = order.front();
      s.sentence = "the " + color + " " + kind + " moving " + dir +
                   " near the " + d0.color + " " + d0.kind;
      span_start = 1;
    }
    s.entity_spans.push_back({span_start, span_start + 1, "t0"});

    s.frames = Tensor({T, 3, S, S});
    for (std::int64_t t = 0; t < T; ++t) render(s.frames, t, order, S, T);

    std::map<std::int64_t, geom::Box> gt;
    for (std::int64_t t = subject.vis_start; t <= subject.vis_end; ++t)
      gt[t] = subject.box_at(t, T);
    s.gt_tube = geom::Tube({subject.vis_start, subject.vis_end}, std::move(gt));

    for (const auto& w : tokenize_words(s.sentence)) all_tokens.insert(w);
    m.samples.push_back(std::move(s));
  }

  for (const auto& tok : all_tokens) m.vocab.add(tok);
  for (auto& s : m.samples) s.tokens = tokenize(s.sentence, m.vocab);
  validate_manifest(m);
  return m;
}

SynthSpec synth_spec_from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open spec file " + path);
  json j = json::parse(f);
  SynthSpec s;
  s.num_videos = j.value("num_videos", s.num_videos);
  s.num_frames = j.value("num_frames", s.num_frames);
  s.image_size = j.value("image_size", s.image_size);
  if (j.contains("kinds")) s.kinds = j["kinds"].get<std::vector<std::string>>();
  if (j.contains("colors"))
    s.colors = j["colors"].get<std::vector<std::string>>();
  s.min_distractors = j.value("min_distractors", s.min_distractors);
  s.max_distractors = j.value("max_distractors", s.max_distractors);
  s.trimmed = j.value("trimmed", s.trimmed);
  s.min_visible = j.value("min_visible", s.min_visible);
  s.max_visible = j.value("max_visible", s.max_visible);
  s.seed = j.value("seed", s.seed);
  s.split = j.value("split", s.split);
  s.fps = j.value("fps", s.fps);
  return s;
}

void synth_spec_to_json_file(const SynthSpec& s, const std::string& path) {
  json j = {{"num_videos", s.num_videos},   {"num_frames", s.num_frames},
            {"image_size", s.image_size},   {"kinds", s.kinds},
            {"colors", s.colors},           {"min_distractors", s.min_distractors},
            {"max_distractors", s.max_distractors}, {"trimmed", s.trimmed},
            {"min_visible", s.min_visible}, {"max_visible", s.max_visible},
            {"seed", s.seed},               {"split", s.split},
            {"fps", s.fps}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open spec file " + path);
  f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// batching

PaddedBatch make_batch(const DatasetManifest& m,
                       const std::vector<std::int64_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  PaddedBatch b;
  b.sample_index = indices;
  for (std::int64_t i : indices) {
    const auto& s = m.samples.at(static_cast<std::size_t>(i));
    b.max_frames = std::max(b.max_frames, s.num_frames());
    b.max_tokens =
        std::max(b.max_tokens, static_cast<std::int64_t>(s.tokens.size()));
  }
  for (std::int64_t i : indices) {
    const auto& s = m.samples.at(static_cast<std::size_t>(i));
    const std::int64_t T = s.num_frames();
    const std::int64_t H = s.image_h(), W = s.image_w();
    Tensor fr({b.max_frames, 3, H, W});
    std::copy(s.frames.data(), s.frames.data() + s.frames.numel(), fr.data());
    b.frames.push_back(std::move(fr));
    std::vector<int> toks(static_cast<std::size_t>(b.max_tokens), kPadId);
    std::copy(s.tokens.begin(), s.tokens.end(), toks.begin());
    b.tokens.push_back(std::move(toks));
    std::vector<std::uint8_t> tm(static_cast<std::size_t>(b.max_tokens), 0);
    std::fill(tm.begin(), tm.begin() + static_cast<std::ptrdiff_t>(
                                           s.tokens.size()), 1);
    b.text_mask.push_back(std::move(tm));
    std::vector<std::uint8_t> fm(static_cast<std::size_t>(b.max_frames), 0);
    std::fill(fm.begin(), fm.begin() + static_cast<std::ptrdiff_t>(T), 1);
    b.frame_mask.push_back(std::move(fm));
  }
  return b;
}

}  // namespace contformer::data
