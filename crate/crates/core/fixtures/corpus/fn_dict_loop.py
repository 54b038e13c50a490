def f(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            out[k].append(v)
        else:
            out[k] = [v]
    return out
# oracle-call: f([('a', 1), ('b', 2), ('a', 3)])
