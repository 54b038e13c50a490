def f(a, b):
    global calls
    calls = a + b
    return calls
# oracle-call: f(1, 2)
