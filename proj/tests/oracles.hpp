#pragma once
// Test-only reference implementations, independent of the library code paths:
// a high-precision (MPFR) power series, closed forms at alpha = 1/2 via
// scaled erfc, and the large-argument asymptotic expansion.

namespace oracles {

// E_{alpha,beta}(z) by direct high-precision summation; precision is chosen
// from the largest-term estimate so cancellation is fully absorbed.
double ml_series_mp(double alpha, double beta, double z);
double ml_series_mp_dz(double alpha, double beta, double z);
// d/dalpha at fixed beta (term-wise digamma weights).
double ml_series_mp_dalpha(double alpha, double beta, double z);
// Total second-slot movement for E_{alpha,alpha}: sum -(k+1) psi(alpha(k+1)) t_k.
double ml_series_mp_dslot_density(double alpha, double z);

// -sum_{k>=1} z^{-k}/Gamma(beta - alpha k), truncated at the smallest term.
// If quality is non-null it receives (smallest term)/|sum|, an upper bound on
// the relative truncation error.
double ml_asymptotic(double alpha, double beta, double z, double* quality = nullptr);

// Reference value with automatic dispatch: high-precision series where the
// cancellation budget is affordable, otherwise the checked asymptotic series.
double ml_ref(double alpha, double beta, double z);

double erfcx(double x);        // exp(x^2) erfc(x), x >= 0
double ml_half(double z);      // E_{1/2}(z) = erfcx(-z), z <= 0
double ml_half_half(double z); // E_{1/2,1/2}(z) = 1/sqrt(pi) + z erfcx(-z), z <= 0

}  // namespace oracles
