def f(n):
    return n
# oracle-call: f(3)
