def f(x):
    if x > 0:
        return 'pos'
    elif x < 0:
        return 'neg'
    else:
        return 'zero'
# oracle-call: f(2)
# oracle-call: f(-2)
# oracle-call: f(0)
