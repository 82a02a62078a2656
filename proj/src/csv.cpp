#include "bidsim/csv.hpp"

#include <cstdio>
#include <sstream>

namespace bidsim {

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

void write_trace_csv(std::ostream& os, const RunResult& run) {
    os << kTraceHeader << '\n';
    for (const TraceRow& r : run.rows) {
        os << r.t << ',' << format_number(r.v) << ',';
        if (r.has_d) os << format_number(r.d);  // empty under bandit feedback
        os << ',' << format_number(r.bid) << ',' << (r.won ? 1 : 0) << ','
           << format_number(r.payment) << ',' << format_number(r.lambda) << ','
           << format_number(r.mu) << ',' << format_number(r.chi) << ',' << format_number(r.psi)
           << ',' << format_number(r.u_cap) << ',' << format_number(r.budget_remaining) << ','
           << format_number(r.roi_slack) << ',' << r.tag << ',' << format_number(r.cum_objective)
           << '\n';
    }
}

std::string trace_csv_string(const RunResult& run) {
    std::ostringstream os;
    write_trace_csv(os, run);
    return os.str();
}

}  // namespace bidsim
