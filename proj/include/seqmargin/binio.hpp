#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace seqmargin::binio {

// Little-endian fixed-width encoding independent of host byte order.
void put_u32(std::ostream& os, std::uint32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
void put_str(std::ostream& os, const std::string& s);
void put_f64s(std::ostream& os, std::span<const double> vs);

std::uint32_t get_u32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
std::string get_str(std::istream& is, std::size_t max_len = 1 << 20);
void get_f64s(std::istream& is, std::span<double> out);

}  // namespace seqmargin::binio
