#include "dppc/errors.hpp"

#include <sstream>

namespace dppc {

namespace {

std::string history_message(double query, double t_start, double t_current) {
    std::ostringstream os;
    os << "history lookup at t=" << query << " outside [" << t_start << ", " << t_current << "]";
    return os.str();
}

std::string violation_message(int row, int level, double value, double t) {
    std::ostringstream os;
    if (row == 0) {
        os << "funnel violation: ||z_" << level << "|| = " << value;
    } else {
        os << "funnel violation: |z_{" << row << "," << level << "}| = " << value;
    }
    os << " at t=" << t;
    return os.str();
}

}  // namespace

MissingHistoryError::MissingHistoryError(double q, double start, double current)
    : Error(history_message(q, start, current)), query(q), t_start(start), t_current(current) {}

FunnelViolation::FunnelViolation(int r, int l, double v, double t)
    : Error(violation_message(r, l, v, t)), row(r), level(l), value(v), time(t) {}

}  // namespace dppc
