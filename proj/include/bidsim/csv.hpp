#pragma once

// Trace serialization. The column set and the 12-significant-digit number
// rendering are frozen: files must be byte-identical across reruns of the
// same seed, so golden tests can diff them directly.

#include <ostream>
#include <string>

#include "bidsim/orchestrator.hpp"

namespace bidsim {

inline constexpr const char* kTraceHeader =
    "t,v,d,bid,won,payment,lambda,mu,chi,psi,u_cap,budget_remaining,roi_slack,policy_tag,"
    "cum_objective";

std::string format_number(double x);  // %.12g

void write_trace_csv(std::ostream& os, const RunResult& run);
std::string trace_csv_string(const RunResult& run);

}  // namespace bidsim
