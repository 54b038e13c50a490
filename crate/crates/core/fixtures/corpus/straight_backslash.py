a = 1 + \
    2 + \
    3
b = a * 2
print(b)
