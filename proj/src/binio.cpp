#include "seqmargin/binio.hpp"

#include "seqmargin/error.hpp"

namespace seqmargin::binio {

namespace {

template <int N>
void put_le(std::ostream& os, std::uint64_t v) {
  char b[N];
  for (int i = 0; i < N; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, N);
}

template <int N>
std::uint64_t get_le(std::istream& is) {
  unsigned char b[N];
  if (!is.read(reinterpret_cast<char*>(b), N)) {
    fail(ErrorCode::kFormat, "unexpected end of binary stream");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < N; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void put_u32(std::ostream& os, std::uint32_t v) { put_le<4>(os, v); }
void put_u64(std::ostream& os, std::uint64_t v) { put_le<8>(os, v); }
void put_f64(std::ostream& os, double v) { put_le<8>(os, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f64s(std::ostream& os, std::span<const double> vs) {
  for (double v : vs) put_f64(os, v);
}

std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le<4>(is)); }
std::uint64_t get_u64(std::istream& is) { return get_le<8>(is); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<8>(is)); }

std::string get_str(std::istream& is, std::size_t max_len) {
  const std::uint32_t n = get_u32(is);
  if (n > max_len) fail(ErrorCode::kFormat, "string field too long in binary stream");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) fail(ErrorCode::kFormat, "unexpected end of binary stream");
  return s;
}

void get_f64s(std::istream& is, std::span<double> out) {
  for (double& v : out) v = get_f64(is);
}

}  // namespace seqmargin::binio
