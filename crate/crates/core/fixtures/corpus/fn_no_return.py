def f(d):
    keys = sorted(d)
    for k in keys:
        d[k] += 1
# oracle-call: f({'a': 1, 'b': 2})
