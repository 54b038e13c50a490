x = 4
if x > 3:
    x -= 3
print(x)
