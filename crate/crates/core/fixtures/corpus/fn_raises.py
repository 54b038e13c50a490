def f(items):
    first = items[0]
    return first * 2
# oracle-call: f([4])
# oracle-call: f([])
