#pragma once

#include <cstddef>

namespace vmac::diff::kernels {

// c = a[m,k] * b[k,n], row-major, c overwritten. The same routine backs both
// the taped op and the no-tape forward paths so the two stay bit-identical.
inline void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// da += dc[m,n] * b[k,n]^T
inline void matmul_grad_a(const double* dc, const double* b, double* da, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* dci = dc + static_cast<std::size_t>(i) * n;
    double* dai = da + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* bp = b + static_cast<std::size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += dci[j] * bp[j];
      dai[p] += acc;
    }
  }
}

// db += a[m,k]^T * dc[m,n]
inline void matmul_grad_b(const double* a, const double* dc, double* db, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    const double* dci = dc + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      double* dbp = db + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) dbp[j] += aip * dci[j];
    }
  }
}

}  // namespace vmac::diff::kernels
