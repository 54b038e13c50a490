def f(s):
    """Reverse words."""
    words = s.split()
    words.reverse()
    return ' '.join(words)
# oracle-call: f('a b c')
