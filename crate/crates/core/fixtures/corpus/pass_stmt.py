x = 3
if x == 3:
    pass
else:
    x = 0
print(x)
