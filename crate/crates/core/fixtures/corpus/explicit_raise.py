x = -1
if x < 0:
    raise ValueError('negative')
print(x)
