# SPDX-License-Identifier: MIT
"""Coupled tensor-ring completion.

Several partially observed tensors that share the leading blocks of their
first ring cores are completed jointly by block coordinate descent; the
package also evaluates the associated excess-risk bound formulas.

The heavy lifting lives in the compiled extension ``ctrc._core``; this
package re-exports its operations.
"""

try:
    from ._core import (  # noqa: F401
        beta_ratio_power,
        contract,
        coupled_bound,
        coupled_fnorm,
        df_star,
        epsilon_search,
        fnorm,
        generate,
        individual_bound,
        pfq,
        rmse,
        solve_coupled,
        subchain,
        supremum_bound,
        tr_als,
        tr_svd,
        __version__,
    )
except ImportError:  # build-tree runs: the extension sits on sys.path
    from _core import (  # noqa: F401
        beta_ratio_power,
        contract,
        coupled_bound,
        coupled_fnorm,
        df_star,
        epsilon_search,
        fnorm,
        generate,
        individual_bound,
        pfq,
        rmse,
        solve_coupled,
        subchain,
        supremum_bound,
        tr_als,
        tr_svd,
        __version__,
    )

__all__ = [
    "beta_ratio_power",
    "contract",
    "coupled_bound",
    "coupled_fnorm",
    "df_star",
    "epsilon_search",
    "fnorm",
    "generate",
    "individual_bound",
    "pfq",
    "rmse",
    "solve_coupled",
    "subchain",
    "supremum_bound",
    "tr_als",
    "tr_svd",
]
