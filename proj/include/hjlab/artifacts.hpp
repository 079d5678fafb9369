#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hjlab/config.hpp"
#include "hjlab/core.hpp"
#include "hjlab/grid.hpp"
#include "hjlab/lattice.hpp"

namespace hjlab {

//! Lowercase hex SHA-256 of @a data.
inline std::string Sha256Hex(std::string_view data) {
  auto digest = std::array<unsigned char, EVP_MAX_MD_SIZE>{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static char const* hex = "0123456789abcdef";
  auto out = std::string();
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string ReadFileBytes(std::filesystem::path const& path) {
  auto in = std::ifstream(path, std::ios::binary);
  if (!in) throw Error(Msg("cannot open ", path.string()));
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void WriteFileBytes(std::filesystem::path const& path, std::string_view bytes) {
  auto out = std::ofstream(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Msg("cannot write ", path.string()));
}

//! CSV table with a fixed header. Every row must have one cell per
//! column; doubles use the shortest round-trip decimal form.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    text_ = Join(columns_);
  }

  class Row {
   public:
    Row& operator<<(double v) { return Add(detail::FormatDouble(v)); }
    Row& operator<<(std::string const& v) { return Add(v); }
    Row& operator<<(char const* v) { return Add(v); }
    template <typename T>
      requires std::is_integral_v<T>
    Row& operator<<(T v) {
      return Add(std::to_string(v));
    }
    ~Row() noexcept(false) {
      if (std::uncaught_exceptions() > 0) return;
      if (cells_.size() != table_.columns_.size()) {
        throw InvalidGeometry(Msg("CSV row has ", cells_.size(), " cells, header has ",
                                  table_.columns_.size()));
      }
      table_.text_ += Join(cells_);
    }

   private:
    friend class CsvTable;
    explicit Row(CsvTable& t) : table_(t) {}
    Row& Add(std::string v) {
      if (v.find_first_of(",\"\n") != std::string::npos) {
        auto q = std::string("\"");
        for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        v = q + "\"";
      }
      cells_.push_back(std::move(v));
      return *this;
    }
    CsvTable& table_;
    std::vector<std::string> cells_;
  };

  //! Starts a row; it is appended when the temporary goes out of scope.
  Row AddRow() { return Row(*this); }

  std::string const& text() const { return text_; }
  std::vector<std::string> const& columns() const { return columns_; }

 private:
  static std::string Join(std::vector<std::string> const& cells) {
    auto s = std::string();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) s += ',';
      s += cells[i];
    }
    return s + "\n";
  }
  std::vector<std::string> columns_;
  std::string text_;
};

namespace detail {

//! Little-endian byte encoding independent of the host.
class ByteWriter {
 public:
  void Raw(std::string_view s) { buf_.append(s); }
  template <typename T>
  void Put(T v) {
    auto u = std::uint64_t{};
    if constexpr (std::is_floating_point_v<T>) {
      static_assert(sizeof(T) == 8);
      std::memcpy(&u, &v, 8);
    } else {
      u = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_ += static_cast<char>((u >> (8 * i)) & 0xff);
  }
  std::string const& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view b) : b_(b) {}
  std::string_view Raw(std::size_t n) {
    Need(n);
    auto const s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T Get() {
    Need(sizeof(T));
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= std::uint64_t{static_cast<unsigned char>(b_[pos_ + i])} << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (std::is_floating_point_v<T>) {
      auto v = T{};
      std::memcpy(&v, &u, 8);
      return v;
    } else {
      return static_cast<T>(u);
    }
  }
  bool AtEnd() const { return pos_ == b_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw InvalidGeometry("binary artifact truncated");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

//! Binary grid format, version 1 (all integers little-endian):
//!   "HJLG" | u32 version | u32 header length | header (JSON text)
//!   | i64 nx | i64 ny | f64 x0 | f64 y0 | f64 h | nx*ny f64 values (row j, then i)
inline constexpr std::uint32_t kGridFormatVersion = 1;

inline std::string EncodeGrid(GridField const& g, nlohmann::json const& header) {
  auto w = detail::ByteWriter();
  w.Raw("HJLG");
  w.Put<std::uint32_t>(kGridFormatVersion);
  auto const h = header.dump();
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(h.size()));
  w.Raw(h);
  w.Put<std::int64_t>(g.nx);
  w.Put<std::int64_t>(g.ny);
  w.Put<double>(g.x0);
  w.Put<double>(g.y0);
  w.Put<double>(g.h);
  for (double v : g.values) w.Put<double>(v);
  return w.bytes();
}

struct DecodedGrid {
  GridField grid;
  nlohmann::json header;
};

inline DecodedGrid DecodeGrid(std::string_view bytes) {
  auto r = detail::ByteReader(bytes);
  if (r.Raw(4) != "HJLG") throw InvalidGeometry("not a grid artifact (bad magic)");
  auto const version = r.Get<std::uint32_t>();
  if (version != kGridFormatVersion) {
    throw InvalidGeometry(Msg("unsupported grid format version ", version));
  }
  auto out = DecodedGrid();
  auto const hlen = r.Get<std::uint32_t>();
  out.header = nlohmann::json::parse(r.Raw(hlen));
  auto const nx = r.Get<std::int64_t>();
  auto const ny = r.Get<std::int64_t>();
  if (nx < 0 || ny < 0) throw InvalidGeometry("negative grid extent");
  out.grid.nx = nx;
  out.grid.ny = ny;
  out.grid.x0 = r.Get<double>();
  out.grid.y0 = r.Get<double>();
  out.grid.h = r.Get<double>();
  out.grid.values.resize(static_cast<std::size_t>(nx * ny));
  for (auto& v : out.grid.values) v = r.Get<double>();
  if (!r.AtEnd()) throw InvalidGeometry("trailing bytes after grid values");
  return out;
}

//! Flat realization table, version 1 (little-endian):
//!   "HJLR" | u32 version | u32 d | u32 m | i32 box_radius | u32 cap_exp
//!   | u64 seed | d x i32 center | u64 count
//!   | count records of (d x i32 k, u64 X_k, u64 Y_k, i8 M_k)
//! M_k is 2 outside the core, where marks are undefined.
inline constexpr std::uint32_t kRealizationFormatVersion = 1;

inline std::string EncodeRealization(LatticeRealization const& lat) {
  auto w = detail::ByteWriter();
  w.Raw("HJLR");
  w.Put<std::uint32_t>(kRealizationFormatVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(lat.d));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(lat.m));
  w.Put<std::int32_t>(lat.box_radius);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(lat.cap_exp));
  w.Put<std::uint64_t>(lat.seed);
  for (int i = 0; i < lat.d; ++i) w.Put<std::int32_t>(lat.center[i]);
  auto const n = lat.size();
  w.Put<std::uint64_t>(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    auto const k = lat.Point(idx);
    for (int i = 0; i < lat.d; ++i) w.Put<std::int32_t>(k[i]);
    w.Put<std::uint64_t>(std::uint64_t{1} << lat.x_exp[idx]);
    w.Put<std::uint64_t>(std::uint64_t{1} << lat.y_exp[idx]);
    w.Put<std::int8_t>(lat.mark[idx]);
  }
  return w.bytes();
}

inline LatticeRealization DecodeRealization(std::string_view bytes) {
  auto r = detail::ByteReader(bytes);
  if (r.Raw(4) != "HJLR") throw InvalidGeometry("not a realization artifact (bad magic)");
  auto const version = r.Get<std::uint32_t>();
  if (version != kRealizationFormatVersion) {
    throw InvalidGeometry(Msg("unsupported realization format version ", version));
  }
  auto lat = LatticeRealization();
  lat.d = static_cast<int>(r.Get<std::uint32_t>());
  lat.m = static_cast<int>(r.Get<std::uint32_t>());
  if (lat.d < 2 || lat.d > kMaxDim) throw InvalidGeometry(Msg("bad dimension ", lat.d));
  lat.box_radius = r.Get<std::int32_t>();
  lat.cap_exp = static_cast<int>(r.Get<std::uint32_t>());
  lat.seed = r.Get<std::uint64_t>();
  for (int i = 0; i < lat.d; ++i) lat.center[i] = r.Get<std::int32_t>();
  auto const n = r.Get<std::uint64_t>();
  if (n != lat.size()) throw InvalidGeometry("record count does not match the box");
  lat.x_exp.resize(n);
  lat.y_exp.resize(n);
  lat.mark.resize(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    auto k = LatticePoint{};
    for (int i = 0; i < lat.d; ++i) k[i] = r.Get<std::int32_t>();
    if (lat.Index(k) != idx) throw InvalidGeometry("records out of canonical order");
    auto const x = r.Get<std::uint64_t>();
    auto const y = r.Get<std::uint64_t>();
    if (!IsDyadic(x) || !IsDyadic(y)) throw InvalidGeometry("X and Y must be powers of two");
    lat.x_exp[idx] = static_cast<std::uint8_t>(Log2(x));
    lat.y_exp[idx] = static_cast<std::uint8_t>(Log2(y));
    lat.mark[idx] = r.Get<std::int8_t>();
  }
  if (!r.AtEnd()) throw InvalidGeometry("trailing bytes after records");
  return lat;
}

}  // namespace hjlab
