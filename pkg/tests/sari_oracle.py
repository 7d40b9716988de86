"""Brute-force SARI oracle: a literal transcription of the set-based
definition, written with plain loops and no shared code with the
implementation under test."""


def _grams(tokens, n):
    out = set()
    for i in range(len(tokens) - n + 1):
        out.add(tuple(tokens[i : i + n]))
    return out


def oracle_sari(source, prediction, references):
    per_n_sum = 0.0
    for n in (1, 2, 3, 4):
        s_set = _grams(source, n)
        p_set = _grams(prediction, n)
        ref_sets = [_grams(r, n) for r in references]

        rho = {}
        every_gram = set()
        for rs in ref_sets:
            every_gram |= rs
        every_gram |= s_set | p_set
        for g in every_gram:
            containing = 0
            for rs in ref_sets:
                if g in rs:
                    containing += 1
            rho[g] = containing / len(ref_sets)

        # ADD
        a_cand = p_set - s_set
        a_good = set()
        for g in a_cand:
            if rho[g] > 0:
                a_good.add(g)
        a_target = set()
        for g in every_gram:
            if rho[g] > 0 and g not in s_set:
                a_target.add(g)
        if len(a_cand) == 0 and len(a_target) == 0:
            p_add, r_add = 1.0, 1.0
        else:
            p_add = len(a_good) / len(a_cand) if a_cand else 0.0
            r_add = len(a_good) / len(a_target) if a_target else 0.0
        f_add = 2 * p_add * r_add / (p_add + r_add) if p_add + r_add > 0 else 0.0

        # KEEP
        k_cand = s_set & p_set
        keep_num = 0.0
        for g in k_cand:
            keep_num += rho[g]
        source_mass = 0.0
        for g in s_set:
            source_mass += rho[g]
        if len(k_cand) == 0 and source_mass == 0:
            p_keep, r_keep = 1.0, 1.0
        else:
            p_keep = keep_num / len(k_cand) if k_cand else 0.0
            r_keep = keep_num / source_mass if source_mass > 0 else 0.0
        f_keep = (
            2 * p_keep * r_keep / (p_keep + r_keep) if p_keep + r_keep > 0 else 0.0
        )

        # DEL (precision only)
        d_cand = s_set - p_set
        del_num = 0.0
        for g in d_cand:
            del_num += 1.0 - rho[g]
        deletable = 0.0
        for g in s_set:
            deletable += 1.0 - rho[g]
        if len(d_cand) == 0 and deletable == 0:
            p_del = 1.0
        elif len(d_cand) == 0 or deletable == 0:
            p_del = 0.0
        else:
            p_del = del_num / len(d_cand)

        per_n_sum += (f_add + f_keep + p_del) / 3.0
    return 100.0 * per_n_sum / 4.0
