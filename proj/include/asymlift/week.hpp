#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "asymlift/errors.hpp"

namespace asymlift {

// ISO year-week key. Weeks are ordered by a dense integer ordinal so that
// recentness percentiles and walk-forward splits never have to reason about
// year boundaries.
struct WeekKey {
    int year = 0;
    int week = 0;  // 1..53

    // 53 slots per year keeps the ordinal strictly increasing across years.
    long ordinal() const noexcept { return static_cast<long>(year) * 53 + (week - 1); }

    auto operator<=>(const WeekKey& other) const noexcept { return ordinal() <=> other.ordinal(); }
    bool operator==(const WeekKey& other) const noexcept { return year == other.year && week == other.week; }

    WeekKey next() const noexcept {
        if (week >= 52) return WeekKey{year + 1, 1};
        return WeekKey{year, week + 1};
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-W%02d", year, week);
        return buf;
    }

    // Accepts "2024-W07" and "2024W07".
    static WeekKey parse(std::string_view text) {
        const auto fail = [&] {
            raise(errc::bad_input, "invalid week '" + std::string(text) + "' (expected YYYY-Wnn)");
        };
        std::size_t sep = text.find('W');
        if (sep == std::string_view::npos || sep < 4) fail();
        std::string_view year_part = text.substr(0, sep);
        if (!year_part.empty() && year_part.back() == '-') year_part.remove_suffix(1);
        std::string_view week_part = text.substr(sep + 1);

        int year = 0, week = 0;
        auto yr = std::from_chars(year_part.data(), year_part.data() + year_part.size(), year);
        auto wr = std::from_chars(week_part.data(), week_part.data() + week_part.size(), week);
        if (yr.ec != std::errc{} || yr.ptr != year_part.data() + year_part.size()) fail();
        if (wr.ec != std::errc{} || wr.ptr != week_part.data() + week_part.size()) fail();
        if (week < 1 || week > 53 || year < 0) fail();
        return WeekKey{year, week};
    }
};

}  // namespace asymlift
