def f(a, b):
    result = (a +
              b)
    return (
        result * 2
    )
# oracle-call: f(1, 2)
