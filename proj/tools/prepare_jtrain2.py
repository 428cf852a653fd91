#!/usr/bin/env python3
"""Prepare the jtrain2 job-training dataset for the opl toolkit.

Produces a flat CSV with the Dehejia-Wahba feature set, a 3-arm action
column derived from months of training, and the 1978 earnings reward:

    features : age, agesq, educ, black, hisp, married, nodegr,
               re74, re74sq, re75, unemp74, unemp75, u74hisp
    action   : 0 = no training, 1 = 1-21 months, 2 = 22-24 months
    reward   : re78

Two modes:

  --dta PATH   exact conversion from the original Stata file
               (LaLonde experimental sample, 445 observations)
  (no --dta)   seeded statistical reconstruction matching the published
               sample composition (185 treated / 260 control; arm sizes
               260/107/78) and the published group-level moments.
               Use this only when the original file is unavailable; the
               earnings values are synthetic.

Usage:
    python3 tools/prepare_jtrain2.py [--dta jtrain2.dta] [--out data/jtrain2_prepared.csv]
"""

import argparse
import numpy as np
import pandas as pd

FEATURES = [
    "age", "agesq", "educ", "black", "hisp", "married", "nodegr",
    "re74", "re74sq", "re75", "unemp74", "unemp75", "u74hisp",
]

ARM_CUTS = (0, 21)  # months: 0 -> arm 0, 1..21 -> arm 1, 22..24 -> arm 2


def discretize(months: np.ndarray) -> np.ndarray:
    arm = np.zeros(len(months), dtype=int)
    for cut in ARM_CUTS:
        arm += (months > cut).astype(int)
    return arm


def from_dta(path: str) -> pd.DataFrame:
    raw = pd.read_stata(path)
    cols = {c.lower(): c for c in raw.columns}

    def col(*names):
        for n in names:
            if n in cols:
                return raw[cols[n]].to_numpy()
        raise KeyError(f"none of {names} found in {sorted(cols)}")

    age = col("age").astype(int)
    educ = col("educ").astype(int)
    black = col("black").astype(int)
    hisp = col("hisp").astype(int)
    married = col("married").astype(int)
    nodegr = col("nodegree", "nodegr").astype(int)
    re74 = col("re74").astype(float)
    re75 = col("re75").astype(float)
    re78 = col("re78").astype(float)
    unemp74 = col("unem74", "unemp74", "u74").astype(int)
    unemp75 = col("unem75", "unemp75", "u75").astype(int)
    mostrn = col("mostrn").astype(float)

    return assemble(age, educ, black, hisp, married, nodegr,
                    re74, re75, re78, unemp74, unemp75, mostrn)


def assemble(age, educ, black, hisp, married, nodegr,
             re74, re75, re78, unemp74, unemp75, mostrn) -> pd.DataFrame:
    df = pd.DataFrame({
        "age": age,
        "agesq": age * age,
        "educ": educ,
        "black": black,
        "hisp": hisp,
        "married": married,
        "nodegr": nodegr,
        "re74": np.round(re74, 3),
        "re74sq": np.round(re74, 3) ** 2,
        "re75": np.round(re75, 3),
        "unemp74": unemp74,
        "unemp75": unemp75,
        "u74hisp": unemp74 * hisp,
        "action": discretize(np.asarray(mostrn)),
        "re78": np.round(re78, 3),
    })
    return df


def _counted_binary(rng, n, ones):
    v = np.zeros(n, dtype=int)
    v[:ones] = 1
    rng.shuffle(v)
    return v


def _lognormal_matched(rng, n, mean, sd):
    """Lognormal draws with the requested mean and standard deviation."""
    if n == 0:
        return np.zeros(0)
    var = np.log(1.0 + (sd / mean) ** 2)
    mu = np.log(mean) - 0.5 * var
    return rng.lognormal(mu, np.sqrt(var), size=n)


def _earnings(rng, n, zero_count, overall_mean, overall_sd):
    """Zero-inflated earnings targeting the requested overall moments.

    Positive values are gamma draws rescaled to hit the positive-part mean
    exactly; the gamma shape is solved from the overall coefficient of
    variation so the realized dispersion is stable at these sample sizes.
    """
    pos = n - zero_count
    z = zero_count / n
    pos_mean = overall_mean / max(1.0 - z, 1e-9)
    cv2 = (overall_sd / overall_mean) ** 2
    cv2_pos = (1.0 + cv2) * (1.0 - z) - 1.0
    shape = 1.0 / max(cv2_pos, 0.05)
    y = np.zeros(n)
    draws = rng.gamma(shape, 1.0, size=pos)
    y[zero_count:] = draws * (pos_mean / draws.mean())
    rng.shuffle(y)
    return np.round(y, 3)


def reconstruct(seed: int = 1986) -> pd.DataFrame:
    """Seeded reconstruction of the experimental sample.

    Group sizes and binary-feature counts reproduce the published
    composition exactly; continuous variables are drawn to match the
    published group means and standard deviations. The arm split of
    the treated group (107 with 1-21 months, 78 with 22-24 months) is
    fixed by construction.
    """
    rng = np.random.default_rng(seed)
    n_c, n_t1, n_t2 = 260, 107, 78
    n_t = n_t1 + n_t2

    def group(n, age_m, age_sd, educ_m, educ_sd, black_k, hisp_k, married_k,
              nodegr_k, u74_k, u75_k, re74_m, re74_sd, re75_m, re75_sd,
              re78_m, re78_sd, re78_zero_k, months, re78_from_features=False):
        age = np.clip(np.round(rng.normal(age_m, age_sd, n)), 17, 55).astype(int)
        educ = np.clip(np.round(rng.normal(educ_m, educ_sd, n)), 3, 16).astype(int)
        black = _counted_binary(rng, n, black_k)
        hisp = np.where(black == 1, 0, 1)
        hisp_idx = np.flatnonzero(hisp)
        rng.shuffle(hisp_idx)
        hisp[:] = 0
        hisp[hisp_idx[:hisp_k]] = 1
        married = _counted_binary(rng, n, married_k)
        nodegr = (educ < 12).astype(int)
        fix = nodegr_k - nodegr.sum()
        idx = np.flatnonzero(nodegr == (1 if fix < 0 else 0))
        rng.shuffle(idx)
        nodegr[idx[:abs(fix)]] = 1 if fix > 0 else 0
        u74 = _counted_binary(rng, n, u74_k)
        u75 = u74.copy()
        flip = u75_k - u75.sum()
        idx = np.flatnonzero(u75 == (1 if flip < 0 else 0))
        rng.shuffle(idx)
        u75[idx[:abs(flip)]] = 1 if flip > 0 else 0
        re74 = np.where(u74 == 1, 0.0,
                        _lognormal_matched(rng, n, re74_m / max(1 - u74_k / n, 1e-9), re74_sd))
        re74 = np.round(re74, 3)
        re75 = np.where(u75 == 1, 0.0,
                        _lognormal_matched(rng, n, re75_m / max(1 - u75_k / n, 1e-9), re75_sd))
        re75 = np.round(re75, 3)
        if re78_from_features:
            # Untrained earnings track earnings history closely: most of the
            # dispersion is explained by the features, leaving a modest
            # conditional spread. Trained earnings (below) are feature-free.
            index = (1.05 * re75 + 0.3 * re74 + 180.0 * (age - 25)
                     + 300.0 * (educ - 10) + 1000.0 * married)
            re78 = index + rng.normal(0.0, 3400.0, size=n)
            re78 = np.clip(re78 + (re78_m - re78.mean()), 0.0, None)
            re78 *= re78_m / re78.mean()
            re78 = np.round(re78, 3)
        else:
            re78 = _earnings(rng, n, re78_zero_k, re78_m, re78_sd)
        return dict(age=age, educ=educ, black=black, hisp=hisp, married=married,
                    nodegr=nodegr, u74=u74, u75=u75, re74=re74, re75=re75,
                    re78=re78, months=months)

    # Published NSW experimental-sample moments (Dehejia & Wahba 1999, Table 1).
    # The treated group (overall re78 mean 6349.14, sd 7867.40) is split by
    # training duration; the subgroup targets below keep the published overall
    # moments while giving the short- and long-duration arms higher means and
    # higher dispersion than the control arm.
    control = group(n_c, 25.05, 7.06, 10.09, 1.61, 215, 28, 39, 217, 195, 177,
                    2107.03, 5687.91, 1266.91, 3102.98, 4554.80, 5483.84, 92,
                    np.zeros(n_c, dtype=int), re78_from_features=True)
    months_1 = np.concatenate([rng.integers(1, 21, size=n_t1 - 30), np.full(30, 21)])
    treated_1 = group(n_t1, 25.82, 7.16, 10.35, 2.01, 90, 6, 20, 76, 76, 64,
                      2095.57, 4886.62, 1532.06, 3219.25, 6000.0, 7980.0, 26,
                      months_1)
    treated_2 = group(n_t2, 25.82, 7.16, 10.35, 2.01, 66, 5, 15, 55, 55, 47,
                      2095.57, 4886.62, 1532.06, 3219.25, 6828.0, 8877.0, 19,
                      rng.integers(22, 25, size=n_t2))

    parts = []
    for g in (control, treated_1, treated_2):
        parts.append(assemble(g["age"], g["educ"], g["black"], g["hisp"],
                              g["married"], g["nodegr"], g["re74"], g["re75"],
                              g["re78"], g["u74"], g["u75"], g["months"]))
    df = pd.concat(parts, ignore_index=True)
    order = rng.permutation(len(df))
    return df.iloc[order].reset_index(drop=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dta", default=None, help="path to the original jtrain2.dta")
    ap.add_argument("--out", default="data/jtrain2_prepared.csv")
    ap.add_argument("--seed", type=int, default=1986,
                    help="reconstruction seed (ignored with --dta)")
    args = ap.parse_args()

    df = from_dta(args.dta) if args.dta else reconstruct(args.seed)

    assert len(df) == 445, f"expected 445 rows, got {len(df)}"
    sizes = df["action"].value_counts().sort_index().tolist()
    assert sizes == [260, 107, 78], f"arm sizes {sizes} != [260, 107, 78]"
    assert list(df.columns) == FEATURES + ["action", "re78"]

    df.to_csv(args.out, index=False)
    print(f"wrote {args.out}: N={len(df)}, arm sizes={sizes}, "
          f"treated={int((df['action'] > 0).sum())}")


if __name__ == "__main__":
    main()
