#include "solis/losses.hpp"

#include <cstdio>

namespace solis {

namespace {
void require_non_negative(double v, const char* name) {
    if (!(v >= 0.0)) throw ConfigError(std::string("loss weight ") + name + " must be non-negative");
}
}  // namespace

void validate(const Phase1Weights& w) {
    require_non_negative(w.data, "lambda_d");
    require_non_negative(w.ic, "lambda_ic");
    require_non_negative(w.phys, "lambda_p");
}

void validate(const Phase2Weights& w) {
    require_non_negative(w.phys, "lambda_p");
    require_non_negative(w.hint, "lambda_h");
    require_non_negative(w.reg, "lambda_reg");
    require_non_negative(w.roll, "lambda_roll");
}

LossLog::LossLog(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    if (!append) out_ << "epoch,phase,data,ic,phys,hint,tv,roll,total,lambda_h\n";
}

void LossLog::write(const LossReport& r) {
    out_ << format_report(r) << '\n';
    out_.flush();
}

std::string format_report(const LossReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.epoch, r.phase, r.data,
                  r.ic, r.phys, r.hint, r.tv, r.roll, r.total, r.lambda_h);
    return buf;
}

}  // namespace solis
