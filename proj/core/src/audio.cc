// Copyright (c) 2026 The PVT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "pvt/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pvt {

namespace {

uint32_t ReadU32(const char* p) {
  return static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
         (static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
         (static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24);
}

uint16_t ReadU16(const char* p) {
  return static_cast<uint16_t>(static_cast<unsigned char>(p[0]) |
                               (static_cast<unsigned char>(p[1]) << 8));
}

void PutU32(std::vector<char>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::vector<char>* out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioBuffer ParseWav(const std::vector<char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavFormatError("malformed header: missing RIFF/WAVE signature");
  }
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* chunk = bytes.data() + pos;
    uint32_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw WavFormatError("malformed header: short fmt chunk");
      }
      format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = ReadU32(bytes.data() + body + 4);
      bits = ReadU16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw WavFormatError("malformed header: data before fmt");
      if (format != 1 && format != 0xFFFE) {
        throw WavFormatError("format=" + std::to_string(format) +
                             ", expected PCM");
      }
      if (channels != 1) {
        throw WavFormatError("channels=" + std::to_string(channels) +
                             ", expected mono");
      }
      if (bits != 16) {
        throw WavFormatError("bits_per_sample=" + std::to_string(bits) +
                             ", expected 16");
      }
      if (rate != static_cast<uint32_t>(kSampleRate)) {
        throw WavFormatError("sample_rate=" + std::to_string(rate) +
                             ", expected 16000");
      }
      if (body + size > bytes.size()) {
        throw WavFormatError("malformed header: data chunk truncated");
      }
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      std::size_t n = size / 2;
      audio.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto word = static_cast<int16_t>(ReadU16(bytes.data() + body + 2 * i));
        audio.samples[i] = static_cast<float>(word) / 32768.0f;
      }
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw WavFormatError("malformed header: no data chunk");
}

AudioBuffer ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  try {
    return ParseWav(bytes);
  } catch (const WavFormatError& e) {
    throw WavFormatError(path + ": " + e.what());
  }
}

void WriteWav(const std::string& path, const AudioBuffer& audio) {
  std::vector<char> out;
  const auto data_bytes = static_cast<uint32_t>(audio.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  PutU32(&out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(&out, 16);
  PutU16(&out, 1);
  PutU16(&out, 1);
  PutU32(&out, static_cast<uint32_t>(audio.sample_rate));
  PutU32(&out, static_cast<uint32_t>(audio.sample_rate) * 2);
  PutU16(&out, 2);
  PutU16(&out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  PutU32(&out, data_bytes);
  for (float s : audio.samples) {
    float c = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
    auto word = static_cast<int16_t>(std::lrint(c * 32768.0f));
    PutU16(&out, static_cast<uint16_t>(word));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace pvt
