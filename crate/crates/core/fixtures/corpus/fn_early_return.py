def f(xs):
    for x in xs:
        if x < 0:
            return x
    return None
# oracle-call: f([1, -2, 3])
# oracle-call: f([])
# oracle-call: f([5])
