#pragma once

namespace travelemb::stats {

/// Standard normal CDF.
double normal_cdf(double x);

/// Two-sided p-value for a z statistic under the standard normal.
double two_sided_p(double z);

/// "**" below 0.05, "*" below 0.1, otherwise empty.
const char* significance_stars(double p);

}  // namespace travelemb::stats
