// Proleptic Gregorian calendar helpers (dates are civil, no time zones).
#pragma once

#include <string>
#include <string_view>

namespace tailreg {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend bool operator==(const Date&, const Date&) = default;
};

bool valid_date(const Date& d);

// Days since 1970-01-01 (negative before the epoch).
int serial_from_date(const Date& d);
Date date_from_serial(int serial);

// 1-based ordinal day within the year (1..365/366).
int day_of_year(const Date& d);

// Parses strict ISO-8601 "YYYY-MM-DD"; returns false on malformed input.
bool parse_iso_date(std::string_view text, Date& out);
std::string format_iso_date(const Date& d);

}  // namespace tailreg
