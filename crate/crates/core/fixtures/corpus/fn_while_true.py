def f(n):
    seen = set()
    while True:
        if n in seen:
            break
        seen.add(n)
        n = (n * n) % 7
    return len(seen)
# oracle-call: f(3)
