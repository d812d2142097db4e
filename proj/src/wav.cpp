#include "binaural/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "binaural/errors.hpp"

namespace binaural {

namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, pos_);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    const std::uint32_t v = b_[pos_] | (b_[pos_ + 1] << 8) | (b_[pos_ + 2] << 16) |
                            (static_cast<std::uint32_t>(b_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string take_tag() {
    need(4, "chunk tag");
    std::string s(reinterpret_cast<const char*>(&b_[pos_]), 4);
    pos_ += 4;
    return s;
  }
  void skip(std::size_t n) {
    need(n, "chunk body");
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<std::uint8_t>& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& o, std::uint16_t v) {
  o.push_back(static_cast<std::uint8_t>(v));
  o.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& o, const char* t) { o.insert(o.end(), t, t + 4); }

}  // namespace

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.take_tag() != "RIFF") throw FormatError("missing RIFF header", 0);
  r.u32("RIFF size");
  if (r.take_tag() != "WAVE") throw FormatError("not a WAVE file", 8);

  int channels = 0, rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::size_t at = r.offset();
    if (r.remaining() < 8) throw FormatError("no data chunk", at);
    const std::string id = r.take_tag();
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("fmt chunk too short", at);
      const std::uint16_t format = r.u16("format");
      channels = r.u16("channels");
      rate = static_cast<int>(r.u32("rate"));
      r.u32("byte rate");
      const std::uint16_t align = r.u16("block align");
      const std::uint16_t bits = r.u16("bits");
      if (format != 1 && format != 0xFFFE) throw FormatError("not PCM (format " + std::to_string(format) + ")", at + 8);
      if (bits != 16) throw FormatError("only 16-bit PCM is supported, got " + std::to_string(bits), at + 22);
      if (channels != 1 && channels != 2) throw FormatError("unsupported channel count " + std::to_string(channels), at + 10);
      if (align != channels * 2) throw FormatError("inconsistent block align", at + 20);
      if (rate <= 0) throw FormatError("invalid sample rate", at + 12);
      r.skip(size - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", at);
      const std::size_t usable = std::min<std::size_t>(size, r.remaining());
      if (usable < size) throw FormatError("data chunk truncated", r.offset() + usable);
      const std::size_t frames = size / (2 * static_cast<std::size_t>(channels));
      std::vector<std::vector<double>> ch(static_cast<std::size_t>(channels), std::vector<double>(frames));
      for (std::size_t i = 0; i < frames; ++i)
        for (int c = 0; c < channels; ++c)
          ch[static_cast<std::size_t>(c)][i] = static_cast<std::int16_t>(r.u16("sample")) / 32768.0;
      if (channels == 1) return AudioBuffer(rate, std::move(ch[0]));
      return AudioBuffer(rate, std::move(ch[0]), std::move(ch[1]));
    } else {
      r.skip(size + (size & 1));
    }
  }
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio) {
  const int channels = audio.channel_count();
  if (channels != 1 && channels != 2) throw std::invalid_argument("encode_wav: 1 or 2 channels required");
  const std::size_t frames = audio.size();
  const std::size_t data = frames * static_cast<std::size_t>(channels) * 2;
  if (data > 0xFFFFFFFFu - 36) throw std::invalid_argument("encode_wav: too long for RIFF");
  std::vector<std::uint8_t> o;
  o.reserve(44 + data);
  put_tag(o, "RIFF");
  put_u32(o, static_cast<std::uint32_t>(36 + data));
  put_tag(o, "WAVE");
  put_tag(o, "fmt ");
  put_u32(o, 16);
  put_u16(o, 1);
  put_u16(o, static_cast<std::uint16_t>(channels));
  put_u32(o, static_cast<std::uint32_t>(audio.sample_rate()));
  put_u32(o, static_cast<std::uint32_t>(audio.sample_rate() * channels * 2));
  put_u16(o, static_cast<std::uint16_t>(channels * 2));
  put_u16(o, 16);
  put_tag(o, "data");
  put_u32(o, static_cast<std::uint32_t>(data));
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double x = audio.channel(c)[i];
      if (!std::isfinite(x))
        throw std::invalid_argument("encode_wav: non-finite sample at " + std::to_string(i));
      const double v = std::clamp(x * 32768.0, -32768.0, 32767.0);
      put_u16(o, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(v))));
    }
  }
  return o;
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav(const AudioBuffer& audio, const std::filesystem::path& path) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace binaural
