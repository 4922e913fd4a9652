/* Copyright 2026 The CSTrack Desk Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cstrack/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cstrack/error.hpp"

namespace cstrack {
namespace {

constexpr const char* kMagic = "CSTRACK-PARAMS";
constexpr int kVersion = 1;

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

double get_f64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (in.gcount() != 8) throw IoError("parameter file: truncated data");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[i];
  return std::bit_cast<double>(bits);
}

std::string header_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("parameter file: truncated header");
  return line;
}

}  // namespace

void save_parameters(std::ostream& out, const ParamStore& store) {
  const auto& params = store.params();
  out << kMagic << ' ' << kVersion << '\n' << "tensors " << params.size() << '\n';
  for (const NamedParam& p : params) {
    const Shape& s = p.var.shape();
    out << p.name << ' ' << s.size();
    for (std::size_t d : s) out << ' ' << d;
    out << '\n';
  }
  out << "data\n";
  for (const NamedParam& p : params)
    for (double v : p.var.value().values()) put_f64(out, v);
  if (!out) throw IoError("parameter file: write failed");
}

void save_parameters(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  save_parameters(out, store);
}

void load_parameters(std::istream& in, ParamStore& store) {
  std::istringstream magic(header_line(in));
  std::string word;
  int version = 0;
  magic >> word >> version;
  if (word != kMagic) throw IoError("parameter file: bad magic");
  if (version != kVersion) {
    throw IoError("parameter file: unsupported version " + std::to_string(version));
  }
  std::istringstream count_line(header_line(in));
  std::size_t count = 0;
  count_line >> word >> count;
  if (word != "tensors") throw IoError("parameter file: missing tensor count");
  auto& params = store.params();
  if (count != params.size()) {
    throw ConfigError("parameter file holds " + std::to_string(count) +
                      " tensors, model has " + std::to_string(params.size()));
  }
  for (const NamedParam& p : params) {
    std::istringstream line(header_line(in));
    std::string name;
    std::size_t rank = 0;
    line >> name >> rank;
    Shape shape(rank);
    for (std::size_t& d : shape) line >> d;
    if (!line) throw IoError("parameter file: malformed tensor line");
    if (name != p.name || shape != p.var.shape()) {
      throw ConfigError("parameter file entry '" + name + "' " +
                        shape_to_string(shape) + " does not match '" + p.name +
                        "' " + shape_to_string(p.var.shape()));
    }
  }
  if (header_line(in) != "data") throw IoError("parameter file: missing data marker");
  for (NamedParam& p : params) {
    Tensor t(p.var.shape());
    for (double& v : t.values()) v = get_f64(in);
    p.var.mutable_value() = std::move(t);
  }
}

void load_parameters(const std::filesystem::path& path, ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  load_parameters(in, store);
}

Sequence load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  const std::filesystem::path base = path.parent_path();
  Sequence seq;
  seq.name = path.stem().string();
  ModalityTag tag = ModalityTag::thermal;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      std::istringstream comment(line.substr(hash + 1));
      std::string key, value;
      comment >> key >> value;
      if (key == "modality:") tag = parse_modality(value);
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string rgb_path, x_path;
    if (!(fields >> rgb_path)) continue;
    if (!(fields >> x_path)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected 'rgb_path x_path [x_c y_c w h]'");
    }
    Frame f;
    f.rgb = read_pnm(base / rgb_path);
    f.x = read_pnm(base / x_path);
    if (f.rgb.height != f.x.height || f.rgb.width != f.x.width) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": RGB and X frames differ in size");
    }
    double b[4];
    std::size_t got = 0;
    while (got < 4 && fields >> b[got]) ++got;
    if (got == 4) {
      f.gt = BBox{b[0], b[1], b[2], b[3]};
    } else if (got != 0) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": a box needs four numbers");
    }
    seq.frames.push_back(std::move(f));
  }
  for (Frame& f : seq.frames) f.modality = tag;
  if (seq.frames.empty()) throw IoError("manifest '" + path.string() + "' lists no frames");
  return seq;
}

void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  out << "# " << seq.name << '\n';
  if (!seq.frames.empty()) out << "# modality: " << to_string(seq.frames[0].modality) << '\n';
  out << std::setprecision(17);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    std::ostringstream stem;
    stem << std::setw(4) << std::setfill('0') << t;
    const std::string rgb = "rgb_" + stem.str() + ".ppm";
    const std::string x = "x_" + stem.str() + ".ppm";
    write_ppm(dir / rgb, seq.frames[t].rgb);
    write_ppm(dir / x, seq.frames[t].x);
    out << rgb << ' ' << x;
    if (const auto& g = seq.frames[t].gt) {
      out << ' ' << g->x_c << ' ' << g->y_c << ' ' << g->w << ' ' << g->h;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing manifest in '" + dir.string() + "'");
}

}  // namespace cstrack
