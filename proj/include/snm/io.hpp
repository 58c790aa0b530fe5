#ifndef SNM_IO_HPP
#define SNM_IO_HPP

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

namespace snm {

/// Decimal text with 17 significant digits: enough to round-trip any double.
/// Used for CSV payloads.
inline std::string fmt_full(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Shortest decimal text that round-trips the double. Used in human-facing
/// reports.
inline std::string fmt_shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Strict double parse of a whole field. Returns false on trailing junk.
inline bool parse_double(std::string_view text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' ||
                           *(last - 1) == '\r'))
    --last;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline bool parse_int(std::string_view text, std::int64_t& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' ||
                           *(last - 1) == '\r'))
    --last;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace snm

#endif  // SNM_IO_HPP
