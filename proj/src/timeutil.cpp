#include "remtime/timeutil.hpp"

#include <cctype>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace remtime {

namespace {

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }

    int digits(std::size_t n) {
        int v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (done() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail();
            v = v * 10 + (s_[pos_++] - '0');
        }
        return v;
    }

    void expect(char c) {
        if (peek() != c) fail();
        ++pos_;
    }

    bool accept(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    void skip_digits() {
        while (!done() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail() const {
        throw std::invalid_argument("cannot parse timestamp '" + std::string(s_) + "'");
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

EpochSeconds from_civil(int y, int mo, int d, int h, int mi, int s) {
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
        throw std::invalid_argument("timestamp field out of range");
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<EpochSeconds>(days) * 86400 + h * 3600 + mi * 60 + s;
}

EpochSeconds parse_iso(std::string_view text) {
    // Trim surrounding whitespace.
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    Cursor c(text);
    const int y = c.digits(4);
    c.expect('-');
    const int mo = c.digits(2);
    c.expect('-');
    const int d = c.digits(2);
    int h = 0, mi = 0, s = 0;
    if (!c.done()) {
        if (!c.accept('T') && !c.accept(' ')) c.fail();
        h = c.digits(2);
        c.expect(':');
        mi = c.digits(2);
        if (c.accept(':')) {
            s = c.digits(2);
            if (c.accept('.') || c.accept(',')) c.skip_digits();
        }
    }
    int offset = 0;
    if (c.accept('Z')) {
    } else if (c.peek() == '+' || c.peek() == '-') {
        const int sign = c.peek() == '-' ? -1 : 1;
        c.accept(c.peek());
        const int oh = c.digits(2);
        c.accept(':');
        const int om = c.done() ? 0 : c.digits(2);
        offset = sign * (oh * 3600 + om * 60);
    }
    if (!c.done()) c.fail();
    return from_civil(y, mo, d, h, mi, s) - offset;
}

}  // namespace

EpochSeconds parse_timestamp(std::string_view text, std::string_view format) {
    if (format == kIsoFormat) return parse_iso(text);
    std::tm tm{};
    std::istringstream is{std::string(text)};
    is >> std::get_time(&tm, std::string(format).c_str());
    if (is.fail()) {
        throw std::invalid_argument("cannot parse timestamp '" + std::string(text) + "' with format '" +
                                    std::string(format) + "'");
    }
    return from_civil(tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
}

std::string format_timestamp(EpochSeconds t) {
    using namespace std::chrono;
    const auto days = static_cast<int>((t >= 0 ? t : t - 86399) / 86400);
    const EpochSeconds rem = t - static_cast<EpochSeconds>(days) * 86400;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
       << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day()) << 'T'
       << std::setw(2) << rem / 3600 << ':' << std::setw(2) << (rem / 60) % 60 << ':' << std::setw(2)
       << rem % 60;
    return os.str();
}

int day_of_week(EpochSeconds t) {
    using namespace std::chrono;
    const auto days = (t >= 0 ? t : t - 86399) / 86400;
    const weekday wd{sys_days{std::chrono::days{days}}};
    return static_cast<int>(wd.iso_encoding()) - 1;
}

int hour_of_day(EpochSeconds t) {
    const EpochSeconds rem = ((t % 86400) + 86400) % 86400;
    return static_cast<int>(rem / 3600);
}

}  // namespace remtime
