#include "tailreg/calendar.hpp"

#include <charconv>
#include <chrono>

namespace tailreg {

namespace {

std::chrono::year_month_day to_ymd(const Date& d) {
  return std::chrono::year{d.year} / d.month / d.day;
}

}  // namespace

bool valid_date(const Date& d) { return to_ymd(d).ok(); }

int serial_from_date(const Date& d) {
  return static_cast<int>(
      std::chrono::sys_days{to_ymd(d)}.time_since_epoch().count());
}

Date date_from_serial(int serial) {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{serial}}};
  return Date{int(ymd.year()), int(unsigned(ymd.month())),
              int(unsigned(ymd.day()))};
}

int day_of_year(const Date& d) {
  const Date jan1{d.year, 1, 1};
  return serial_from_date(d) - serial_from_date(jan1) + 1;
}

bool parse_iso_date(std::string_view text, Date& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  auto parse_int = [](std::string_view s, int& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  Date d;
  if (!parse_int(text.substr(0, 4), d.year) ||
      !parse_int(text.substr(5, 2), d.month) ||
      !parse_int(text.substr(8, 2), d.day))
    return false;
  if (!valid_date(d)) return false;
  out = d;
  return true;
}

std::string format_iso_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

}  // namespace tailreg
